#include "lanet/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lanet {

using nlohmann::ordered_json;

void ModelConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("model." + key + ": " + why);
    };
    try {
        problem.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("model.problem: ") + e.what());
    }
    if (width < 1) fail("width", "must be >= 1");
    if (heads < 1 || width % heads != 0) fail("heads", "must be >= 1 and divide width");
    if (map_rounds < 0) fail("map_rounds", "must be >= 0");
    if (encoder_rounds < 0) fail("encoder_rounds", "must be >= 0");
    if (refine_steps < 0) fail("refine_steps", "must be >= 0");
    if (knn_k < 1) fail("knn_k", "must be >= 1");
    if (temporal_window < 0) fail("temporal_window", "must be >= 0");
    if (!(agent_map_radius > 0.0)) fail("agent_map_radius", "must be > 0");
    if (!(agent_agent_radius > 0.0)) fail("agent_agent_radius", "must be > 0");
    if (caip_hidden < 1) fail("caip_hidden", "must be >= 1");
    if (!(theta_init > 0.0 && theta_init < 1.0)) fail("theta_init", "must be in (0, 1)");
    if (!(tau_init > 0.0)) fail("tau_init", "must be > 0");
    if (!std::isfinite(caip_score_bias)) fail("caip_score_bias", "must be finite");
    if (!(scale_floor > 0.0)) fail("scale_floor", "must be > 0");
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    try {
        synth.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("synth: ") + e.what());
    }
    for (double t : theta_sweep)
        if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("theta_sweep: values must lie in [0, 1]");
}

namespace {

ordered_json problem_json(const ProblemConfig& p) {
    return {{"history_steps", p.history_steps},
            {"future_steps", p.future_steps},
            {"num_modes", p.num_modes},
            {"points_per_polyline", p.points_per_polyline},
            {"step_period", p.step_period}};
}

ordered_json model_json(const ModelConfig& m) {
    return {{"problem", problem_json(m.problem)},
            {"width", m.width},
            {"heads", m.heads},
            {"map_rounds", m.map_rounds},
            {"encoder_rounds", m.encoder_rounds},
            {"refine_steps", m.refine_steps},
            {"knn_k", m.knn_k},
            {"temporal_window", m.temporal_window},
            {"agent_map_radius", m.agent_map_radius},
            {"agent_agent_radius", m.agent_agent_radius},
            {"caip_hidden", m.caip_hidden},
            {"theta_init", m.theta_init},
            {"tau_init", m.tau_init},
            {"caip_score_bias", m.caip_score_bias},
            {"learn_tau", m.learn_tau},
            {"eq8_as_printed", m.eq8_as_printed},
            {"caip_in_encoder", m.caip_in_encoder},
            {"scale_floor", m.scale_floor}};
}

// Reads `doc` field by field into the bound targets; anything unbound is an error.
class Reader {
public:
    Reader(const ordered_json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {
        if (!doc_.is_object()) throw std::invalid_argument(where("") + ": expected an object");
    }

    template <typename T>
    Reader& field(const std::string& key, T& out) {
        seen_.push_back(key);
        auto it = doc_.find(key);
        if (it == doc_.end()) return *this;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (it->is_number_integer() && !it->is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw std::invalid_argument("expected a number");
            }
            out = it->template get<T>();
        } catch (const std::exception& e) {
            throw std::invalid_argument(where(key) + ": " + e.what());
        }
        return *this;
    }

    template <typename F>
    Reader& object(const std::string& key, F&& read) {
        seen_.push_back(key);
        auto it = doc_.find(key);
        if (it != doc_.end()) read(*it, where(key));
        return *this;
    }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw std::invalid_argument(where(it.key()) + ": unknown key");
    }

private:
    std::string where(const std::string& key) const {
        if (prefix_.empty()) return key;
        return key.empty() ? prefix_ : prefix_ + "." + key;
    }

    const ordered_json& doc_;
    std::string prefix_;
    std::vector<std::string> seen_;
};

void read_problem(const ordered_json& j, const std::string& where, ProblemConfig& p) {
    Reader(j, where)
        .field("history_steps", p.history_steps)
        .field("future_steps", p.future_steps)
        .field("num_modes", p.num_modes)
        .field("points_per_polyline", p.points_per_polyline)
        .field("step_period", p.step_period)
        .finish();
}

}  // namespace

ordered_json to_json(const RunConfig& c) {
    const TrainConfig& t = c.train;
    const GeneratorSpec& s = c.synth;
    ordered_json doc;
    doc["seed"] = c.seed;
    doc["model"] = model_json(c.model);
    doc["train"] = {{"lambda", t.lambda},
                    {"learning_rate", t.learning_rate},
                    {"steps", t.steps},
                    {"batch_size", t.batch_size},
                    {"beta1", t.beta1},
                    {"beta2", t.beta2},
                    {"epsilon", t.epsilon},
                    {"grad_clip", t.grad_clip},
                    {"warmup_steps", t.warmup_steps},
                    {"log_every", t.log_every}};
    doc["synth"] = {{"num_lanes", s.num_lanes},
                    {"segments_per_lane", s.segments_per_lane},
                    {"lane_width", s.lane_width},
                    {"segment_length", s.segment_length},
                    {"max_curvature", s.max_curvature},
                    {"crosswalk_probability", s.crosswalk_probability},
                    {"road_edges", s.road_edges},
                    {"num_agents", s.num_agents},
                    {"num_targets", s.num_targets},
                    {"min_speed", s.min_speed},
                    {"max_speed", s.max_speed},
                    {"max_accel", s.max_accel},
                    {"lateral_noise", s.lateral_noise},
                    {"heading_noise", s.heading_noise},
                    {"history_dropout", s.history_dropout},
                    {"pedestrian_probability", s.pedestrian_probability},
                    {"random_pose", s.random_pose}};
    doc["theta_sweep"] = c.theta_sweep;
    return doc;
}

RunConfig from_json(const ordered_json& doc, RunConfig c) {
    Reader(doc, "")
        .field("seed", c.seed)
        .object("model",
                [&](const ordered_json& j, const std::string& w) {
                    ModelConfig& m = c.model;
                    Reader(j, w)
                        .object("problem", [&](const ordered_json& p, const std::string& pw) { read_problem(p, pw, m.problem); })
                        .field("width", m.width)
                        .field("heads", m.heads)
                        .field("map_rounds", m.map_rounds)
                        .field("encoder_rounds", m.encoder_rounds)
                        .field("refine_steps", m.refine_steps)
                        .field("knn_k", m.knn_k)
                        .field("temporal_window", m.temporal_window)
                        .field("agent_map_radius", m.agent_map_radius)
                        .field("agent_agent_radius", m.agent_agent_radius)
                        .field("caip_hidden", m.caip_hidden)
                        .field("theta_init", m.theta_init)
                        .field("tau_init", m.tau_init)
                        .field("caip_score_bias", m.caip_score_bias)
                        .field("learn_tau", m.learn_tau)
                        .field("eq8_as_printed", m.eq8_as_printed)
                        .field("caip_in_encoder", m.caip_in_encoder)
                        .field("scale_floor", m.scale_floor)
                        .finish();
                })
        .object("train",
                [&](const ordered_json& j, const std::string& w) {
                    TrainConfig& t = c.train;
                    Reader(j, w)
                        .field("lambda", t.lambda)
                        .field("learning_rate", t.learning_rate)
                        .field("steps", t.steps)
                        .field("batch_size", t.batch_size)
                        .field("beta1", t.beta1)
                        .field("beta2", t.beta2)
                        .field("epsilon", t.epsilon)
                        .field("grad_clip", t.grad_clip)
                        .field("warmup_steps", t.warmup_steps)
                        .field("log_every", t.log_every)
                        .finish();
                })
        .object("synth",
                [&](const ordered_json& j, const std::string& w) {
                    GeneratorSpec& s = c.synth;
                    Reader(j, w)
                        .field("num_lanes", s.num_lanes)
                        .field("segments_per_lane", s.segments_per_lane)
                        .field("lane_width", s.lane_width)
                        .field("segment_length", s.segment_length)
                        .field("max_curvature", s.max_curvature)
                        .field("crosswalk_probability", s.crosswalk_probability)
                        .field("road_edges", s.road_edges)
                        .field("num_agents", s.num_agents)
                        .field("num_targets", s.num_targets)
                        .field("min_speed", s.min_speed)
                        .field("max_speed", s.max_speed)
                        .field("max_accel", s.max_accel)
                        .field("lateral_noise", s.lateral_noise)
                        .field("heading_noise", s.heading_noise)
                        .field("history_dropout", s.history_dropout)
                        .field("pedestrian_probability", s.pedestrian_probability)
                        .field("random_pose", s.random_pose)
                        .finish();
                })
        .field("theta_sweep", c.theta_sweep)
        .finish();
    c.synth.config = c.model.problem;
    return c;
}

void apply_override(ordered_json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    ordered_json value = ordered_json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    ordered_json* node = &doc;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) path.push_back(part);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (!node->is_object()) throw std::invalid_argument("override '" + key + "': '" + path[i] + "' is not a section");
        node = &(*node)[path[i]];
    }
    (*node)[path.back()] = std::move(value);
}

RunConfig resolve_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    ordered_json doc = to_json(RunConfig{});
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw std::invalid_argument("config: cannot open " + file.string());
        ordered_json user = ordered_json::parse(in, nullptr, false);
        if (user.is_discarded()) throw std::invalid_argument("config: " + file.string() + " is not valid JSON");
        doc.merge_patch(user);
    }
    for (const auto& o : overrides) apply_override(doc, o);
    RunConfig c = from_json(doc);
    c.validate();
    return c;
}

std::vector<std::string> model_config_diff(const ModelConfig& a, const ModelConfig& b) {
    std::vector<std::string> out;
    const ordered_json ja = model_json(a), jb = model_json(b);
    for (const auto& entry : ordered_json::diff(ja, jb)) {
        std::string path = entry["path"].get<std::string>();
        std::replace(path.begin(), path.end(), '/', '.');
        out.push_back("model" + path);
    }
    return out;
}

}  // namespace lanet
