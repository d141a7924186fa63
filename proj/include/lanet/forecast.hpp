#pragma once

#include "lanet/geometry.hpp"
#include "lanet/nn/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lanet {

/// K-mode forecast for one target agent, in the scene frame. Matrices are K x T.
struct Forecast {
    std::string agent_id;
    Pose2 origin;
    nn::Matrix loc_x, loc_y;
    nn::Matrix scale_x, scale_y;
    nn::Matrix heading;
    nn::Matrix heading_conf;
    std::vector<double> probs;  // K, sums to 1

    int num_modes() const { return static_cast<int>(loc_x.rows()); }
    int horizon() const { return static_cast<int>(loc_x.cols()); }
};

/// Ground-truth future of one target agent in the scene frame.
struct FutureTruth {
    std::vector<double> x, y, heading;
    std::vector<std::uint8_t> valid;

    int horizon() const { return static_cast<int>(x.size()); }
};

struct SceneForecast {
    std::string scenario_id;
    std::vector<Forecast> forecasts;
};

std::string serialize_forecasts(const std::vector<SceneForecast>& scenes);
std::vector<SceneForecast> parse_forecasts(const std::string& text);
void save_forecasts(const std::vector<SceneForecast>& scenes, const std::filesystem::path& path);
std::vector<SceneForecast> load_forecasts(const std::filesystem::path& path);

}  // namespace lanet
