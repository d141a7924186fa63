#include "lanet/forecast.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace lanet {

using nlohmann::ordered_json;

namespace {

ordered_json rows_of(const nn::Matrix& m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

ordered_json pairs_of(const nn::Matrix& a, const nn::Matrix& b) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back({a(r, c), b(r, c)});
        out.push_back(std::move(row));
    }
    return out;
}

nn::Matrix matrix_of(const ordered_json& j, int k, int t, const char* field) {
    nn::Matrix m(k, t);
    if (!j.is_array() || static_cast<int>(j.size()) != k) throw std::runtime_error(std::string("forecast: bad ") + field);
    for (int r = 0; r < k; ++r) {
        if (static_cast<int>(j[r].size()) != t) throw std::runtime_error(std::string("forecast: bad ") + field);
        for (int c = 0; c < t; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

void split_pairs(const ordered_json& j, int k, int t, nn::Matrix& a, nn::Matrix& b, const char* field) {
    a.resize(k, t);
    b.resize(k, t);
    if (!j.is_array() || static_cast<int>(j.size()) != k) throw std::runtime_error(std::string("forecast: bad ") + field);
    for (int r = 0; r < k; ++r) {
        if (static_cast<int>(j[r].size()) != t) throw std::runtime_error(std::string("forecast: bad ") + field);
        for (int c = 0; c < t; ++c) {
            a(r, c) = j[r][c].at(0).get<double>();
            b(r, c) = j[r][c].at(1).get<double>();
        }
    }
}

}  // namespace

std::string serialize_forecasts(const std::vector<SceneForecast>& scenes) {
    ordered_json doc = ordered_json::array();
    for (const auto& s : scenes) {
        ordered_json fs = ordered_json::array();
        for (const auto& f : s.forecasts)
            fs.push_back({{"agent_id", f.agent_id},
                          {"origin", {f.origin.x, f.origin.y, f.origin.heading}},
                          {"num_modes", f.num_modes()},
                          {"horizon", f.horizon()},
                          {"mode_probs", f.probs},
                          {"locations", pairs_of(f.loc_x, f.loc_y)},
                          {"scales", pairs_of(f.scale_x, f.scale_y)},
                          {"headings", rows_of(f.heading)},
                          {"heading_confidence", rows_of(f.heading_conf)}});
        doc.push_back({{"scenario_id", s.scenario_id}, {"forecasts", std::move(fs)}});
    }
    return doc.dump(1) + "\n";
}

std::vector<SceneForecast> parse_forecasts(const std::string& text) {
    ordered_json doc = ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) throw std::runtime_error("forecast: expected a JSON array");
    std::vector<SceneForecast> out;
    for (const auto& s : doc) {
        SceneForecast sf;
        sf.scenario_id = s.at("scenario_id").get<std::string>();
        for (const auto& j : s.at("forecasts")) {
            Forecast f;
            const int k = j.at("num_modes").get<int>(), t = j.at("horizon").get<int>();
            f.agent_id = j.at("agent_id").get<std::string>();
            const auto& o = j.at("origin");
            f.origin = Pose2(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
            f.probs = j.at("mode_probs").get<std::vector<double>>();
            if (static_cast<int>(f.probs.size()) != k) throw std::runtime_error("forecast: bad mode_probs");
            split_pairs(j.at("locations"), k, t, f.loc_x, f.loc_y, "locations");
            split_pairs(j.at("scales"), k, t, f.scale_x, f.scale_y, "scales");
            f.heading = matrix_of(j.at("headings"), k, t, "headings");
            f.heading_conf = matrix_of(j.at("heading_confidence"), k, t, "heading_confidence");
            sf.forecasts.push_back(std::move(f));
        }
        out.push_back(std::move(sf));
    }
    return out;
}

void save_forecasts(const std::vector<SceneForecast>& scenes, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("forecast: cannot write " + path.string());
    out << serialize_forecasts(scenes);
}

std::vector<SceneForecast> load_forecasts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("forecast: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_forecasts(text);
}

}  // namespace lanet
