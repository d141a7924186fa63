#pragma once

#include "lanet/forecast.hpp"
#include "lanet/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lanet {

struct PlotOptions {
    int width_px = 800;
    double margin = 5.0;  // scene units around the bounding box
};

/// Standalone SVG 1.1 document: map polylines, observed histories, ground
/// truth futures, every predicted mode and the most probable mode drawn on
/// top. Each prediction is a <polyline class="prediction">, the highlighted
/// one has class "best".
std::string render_svg(const Scene& scene, const std::vector<Forecast>& forecasts, const PlotOptions& opts = {});

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace lanet
