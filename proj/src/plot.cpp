#include "lanet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lanet {

namespace {

struct Box {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -std::numeric_limits<double>::infinity(), y1 = x1;

    void add(double x, double y) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
    }
    bool empty() const { return !(x0 <= x1); }
};

const char* map_color(PolygonKind k) {
    switch (k) {
        case PolygonKind::LaneCenterline: return "#b0b0b0";
        case PolygonKind::LaneBoundary: return "#606060";
        case PolygonKind::Crosswalk: return "#d0a040";
        case PolygonKind::RoadEdge: return "#202020";
    }
    return "#000000";
}

class Canvas {
public:
    Canvas(const Box& box, int width_px) : box_(box) {
        const double w = box.x1 - box.x0, h = box.y1 - box.y0;
        scale_ = width_px / std::max(w, 1e-9);
        width_ = width_px;
        height_ = static_cast<int>(std::ceil(h * scale_));
    }

    std::string point(double x, double y) const {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f,%.2f", (x - box_.x0) * scale_, (box_.y1 - y) * scale_);
        return buf;
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const char* cls, const char* color, double width,
                  const char* extra = "") {
        if (pts.empty()) return;
        body_ += "  <polyline class=\"";
        body_ += cls;
        body_ += "\" fill=\"none\" stroke=\"";
        body_ += color;
        char buf[48];
        std::snprintf(buf, sizeof buf, "\" stroke-width=\"%.2f\"", width);
        body_ += buf;
        body_ += extra;
        body_ += " points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ += ' ';
            body_ += point(pts[i].first, pts[i].second);
        }
        body_ += "\"/>\n";
    }

    void circle(double x, double y, double r, const char* cls, const char* color) {
        const std::string p = point(x, y);
        const auto comma = p.find(',');
        char buf[200];
        std::snprintf(buf, sizeof buf, "  <circle class=\"%s\" cx=\"%s\" cy=\"%s\" r=\"%.2f\" fill=\"%s\"/>\n", cls,
                      p.substr(0, comma).c_str(), p.substr(comma + 1).c_str(), r, color);
        body_ += buf;
    }

    std::string finish(const std::string& title) const {
        char head[400];
        std::snprintf(head, sizeof head,
                      "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
                      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%d\" height=\"%d\" "
                      "viewBox=\"0 0 %d %d\">\n",
                      width_, height_, width_, height_);
        std::string out = head;
        out += "  <title>" + title + "</title>\n";
        out += "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
        out += body_;
        out += "</svg>\n";
        return out;
    }

private:
    Box box_;
    double scale_ = 1.0;
    int width_ = 0, height_ = 0;
    std::string body_;
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const Scene& scene, const std::vector<Forecast>& forecasts, const PlotOptions& opts) {
    if (opts.width_px < 1) throw std::invalid_argument("render_svg: width must be positive");
    const int h = scene.config.history_steps;
    Box box;
    for (const auto& poly : scene.polygons)
        for (const auto& p : poly.points) box.add(p.x, p.y);
    for (const auto& a : scene.agents)
        for (std::size_t t = 0; t < a.states.size(); ++t)
            if (a.valid[t]) box.add(a.states[t].pose.x, a.states[t].pose.y);
    for (const auto& f : forecasts)
        for (int m = 0; m < f.num_modes(); ++m)
            for (int t = 0; t < f.horizon(); ++t) box.add(f.loc_x(m, t), f.loc_y(m, t));
    if (box.empty()) box = {0.0, 0.0, 1.0, 1.0};
    box.x0 -= opts.margin;
    box.y0 -= opts.margin;
    box.x1 += opts.margin;
    box.y1 += opts.margin;

    Canvas canvas(box, opts.width_px);
    for (const auto& poly : scene.polygons) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : poly.points) pts.emplace_back(p.x, p.y);
        canvas.polyline(pts, "map", map_color(poly.kind), poly.kind == PolygonKind::LaneCenterline ? 1.0 : 1.5,
                        poly.kind == PolygonKind::LaneCenterline ? " stroke-dasharray=\"4,3\"" : "");
    }
    for (const auto& a : scene.agents) {
        std::vector<std::pair<double, double>> hist, fut;
        for (int t = 0; t < static_cast<int>(a.states.size()); ++t) {
            if (!a.valid[t]) continue;
            (t < h ? hist : fut).emplace_back(a.states[t].pose.x, a.states[t].pose.y);
        }
        canvas.polyline(hist, "history", a.is_target ? "#1f4fb4" : "#8090b0", 2.0);
        if (a.is_target) canvas.polyline(fut, "truth", "#7b2fa8", 2.0);
        if (!hist.empty()) canvas.circle(hist.back().first, hist.back().second, 3.0, "agent", a.is_target ? "#1f4fb4" : "#8090b0");
    }
    for (const auto& f : forecasts) {
        int best = 0;
        for (int m = 1; m < f.num_modes(); ++m)
            if (f.probs[m] > f.probs[best]) best = m;
        auto mode_points = [&](int m) {
            std::vector<std::pair<double, double>> pts{{f.origin.x, f.origin.y}};
            for (int t = 0; t < f.horizon(); ++t) pts.emplace_back(f.loc_x(m, t), f.loc_y(m, t));
            return pts;
        };
        for (int m = 0; m < f.num_modes(); ++m) canvas.polyline(mode_points(m), "prediction", "#e08020", 1.2);
        if (f.num_modes() > 0) canvas.polyline(mode_points(best), "best", "#d02020", 2.4);
    }
    return canvas.finish(escape(scene.scenario_id));
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("plot: cannot write " + path.string());
    out << svg;
}

}  // namespace lanet
