#include "lanet/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace lanet {

using Json = nlohmann::ordered_json;

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const char* const (&names)[N], const std::string& field) {
    for (std::size_t i = 0; i < N; ++i)
        if (s == names[i]) return static_cast<E>(i);
    throw SceneError(SceneError::Kind::Schema, field, "unknown value '" + s + "'");
}

constexpr const char* kAgentTypeNames[] = {"vehicle", "pedestrian", "cyclist", "bus", "motorcyclist", "other"};
constexpr const char* kKindNames[] = {"lane_centerline", "lane_boundary", "crosswalk", "road_edge"};
constexpr const char* kLaneTypeNames[] = {"vehicle", "bike", "bus", "pedestrian", "none"};
constexpr const char* kRelationNames[] = {"predecessor",    "successor",   "left_neighbor",
                                          "right_neighbor", "boundary_of", "crossing"};

[[noreturn]] void schema(const std::string& field, const std::string& msg) {
    throw SceneError(SceneError::Kind::Schema, field, msg);
}

[[noreturn]] void invariant(const std::string& field, const std::string& msg) {
    throw SceneError(SceneError::Kind::Invariant, field, msg);
}

const Json& member(const Json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) schema(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema(path.empty() ? key : path + "." + key, "missing field");
    return *it;
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const Json& j, const std::string& path) {
    if (!j.is_number()) schema(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) schema(path, "non-finite number");
    return v;
}

int integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) schema(path, "expected an integer");
    return j.get<int>();
}

std::string string(const Json& j, const std::string& path) {
    if (!j.is_string()) schema(path, "expected a string");
    return j.get<std::string>();
}

bool boolean(const Json& j, const std::string& path) {
    if (!j.is_boolean()) schema(path, "expected a boolean");
    return j.get<bool>();
}

const Json& array(const Json& j, const std::string& path) {
    if (!j.is_array()) schema(path, "expected an array");
    return j;
}

Pose2 pose_from(const Json& j, const std::string& path, std::size_t width) {
    if (!j.is_array() || j.size() != width)
        schema(path, "expected an array of " + std::to_string(width) + " numbers");
    const double heading = number(j[2], index(path, 2));
    return Pose2(number(j[0], index(path, 0)), number(j[1], index(path, 1)), heading);
}

}  // namespace

const char* to_string(AgentType t) { return kAgentTypeNames[static_cast<int>(t)]; }
const char* to_string(PolygonKind k) { return kKindNames[static_cast<int>(k)]; }
const char* to_string(LaneType t) { return kLaneTypeNames[static_cast<int>(t)]; }
const char* to_string(Relation r) { return kRelationNames[static_cast<int>(r)]; }

SceneError::SceneError(Kind kind, std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : field + ": " + message),
      kind_(kind),
      field_(std::move(field)),
      message_(message) {}

void ProblemConfig::validate() const {
    if (history_steps < 1) invariant("config.history_steps", "must be >= 1");
    if (future_steps < 1) invariant("config.future_steps", "must be >= 1");
    if (num_modes < 1) invariant("config.num_modes", "must be >= 1");
    if (points_per_polyline < 1) invariant("config.points_per_polyline", "must be >= 1");
    if (!(step_period > 0.0) || !std::isfinite(step_period)) invariant("config.step_period", "must be > 0");
}

int AgentTrack::last_observed(int history_steps) const {
    for (int t = std::min<int>(history_steps, static_cast<int>(valid.size())) - 1; t >= 0; --t)
        if (valid[t]) return t;
    return -1;
}

std::vector<int> Scene::target_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].is_target) out.push_back(static_cast<int>(i));
    return out;
}

std::size_t Scene::num_map_points() const {
    std::size_t n = 0;
    for (const auto& p : polygons) n += p.points.size();
    return n;
}

void validate_scene(const Scene& scene) {
    scene.config.validate();
    const auto total = static_cast<std::size_t>(scene.config.total_steps());
    for (std::size_t i = 0; i < scene.agents.size(); ++i) {
        const auto& a = scene.agents[i];
        const std::string path = index("agents", i);
        if (a.states.size() != total)
            schema(path + ".states", "expected " + std::to_string(total) + " states, got " + std::to_string(a.states.size()));
        if (a.valid.size() != a.states.size())
            schema(path + ".valid", "length " + std::to_string(a.valid.size()) + " differs from states length " +
                                        std::to_string(a.states.size()));
        for (std::size_t t = 0; t < a.states.size(); ++t) {
            const auto& s = a.states[t];
            if (!std::isfinite(s.pose.x) || !std::isfinite(s.pose.y) || !std::isfinite(s.pose.heading))
                invariant(index(path + ".states", t), "non-finite pose");
            if (!(s.velocity >= 0.0) || !std::isfinite(s.velocity))
                invariant(index(path + ".states", t), "velocity must be finite and >= 0");
        }
        if (a.is_target && a.last_observed(scene.config.history_steps) < 0)
            invariant(path + ".valid", "target agent has no valid observed step");
    }
    bool has_centerline = false;
    for (std::size_t i = 0; i < scene.polygons.size(); ++i) {
        const auto& p = scene.polygons[i];
        const std::string path = index("polygons", i);
        if (p.points.size() < 2) invariant(path + ".points", "a polygon needs at least 2 points");
        has_centerline = has_centerline || p.kind == PolygonKind::LaneCenterline;
        for (std::size_t k = 0; k < p.points.size(); ++k) {
            const std::size_t a = k + 1 < p.points.size() ? k : k - 1;
            const double dx = p.points[a + 1].x - p.points[a].x;
            const double dy = p.points[a + 1].y - p.points[a].y;
            if (dx == 0.0 && dy == 0.0) invariant(index(path + ".points", a + 1), "duplicate consecutive point");
            const double tangent = std::atan2(dy, dx);
            if (std::abs(wrap_angle(p.points[k].heading - tangent)) > 1e-6)
                invariant(index(path + ".points", k), "heading disagrees with the segment tangent");
        }
    }
    const auto np = static_cast<int>(scene.polygons.size());
    std::vector<std::uint8_t> bounded(scene.polygons.size(), 0);
    for (std::size_t e = 0; e < scene.adjacency.size(); ++e) {
        const auto& edge = scene.adjacency[e];
        const std::string path = index("adjacency", e);
        if (edge.source < 0 || edge.source >= np) invariant(path + ".source", "polygon index out of range");
        if (edge.target < 0 || edge.target >= np) invariant(path + ".target", "polygon index out of range");
        if (edge.relation == Relation::BoundaryOf) {
            bounded[edge.source] = 1;
            bounded[edge.target] = 1;
        }
    }
    if (has_centerline)
        for (std::size_t i = 0; i < scene.polygons.size(); ++i)
            if (scene.polygons[i].kind == PolygonKind::LaneBoundary && !bounded[i])
                invariant(index("polygons", i), "lane boundary is not attached to any centerline");
}

Scene parse_scene(const std::string& text) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SceneError(SceneError::Kind::Parse, "", e.what());
    }
    Scene scene;
    scene.scenario_id = string(member(root, "scenario_id", ""), "scenario_id");

    const Json& cfg = member(root, "config", "");
    scene.config.history_steps = integer(member(cfg, "history_steps", "config"), "config.history_steps");
    scene.config.future_steps = integer(member(cfg, "future_steps", "config"), "config.future_steps");
    scene.config.num_modes = integer(member(cfg, "num_modes", "config"), "config.num_modes");
    scene.config.points_per_polyline = integer(member(cfg, "points_per_polyline", "config"), "config.points_per_polyline");
    scene.config.step_period = number(member(cfg, "step_period", "config"), "config.step_period");

    const Json& agents = array(member(root, "agents", ""), "agents");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::string path = index("agents", i);
        const Json& a = agents[i];
        AgentTrack track;
        track.agent_id = string(member(a, "agent_id", path), join(path, "agent_id"));
        track.agent_type = parse_enum<AgentType>(string(member(a, "agent_type", path), join(path, "agent_type")),
                                                 kAgentTypeNames, join(path, "agent_type"));
        const Json& states = array(member(a, "states", path), join(path, "states"));
        for (std::size_t t = 0; t < states.size(); ++t) {
            const std::string sp = index(join(path, "states"), t);
            AgentState s;
            s.pose = pose_from(states[t], sp, 4);
            s.velocity = number(states[t][3], index(sp, 3));
            track.states.push_back(s);
        }
        const Json& valid = array(member(a, "valid", path), join(path, "valid"));
        for (std::size_t t = 0; t < valid.size(); ++t)
            track.valid.push_back(boolean(valid[t], index(join(path, "valid"), t)) ? 1 : 0);
        track.is_target = boolean(member(a, "is_target", path), join(path, "is_target"));
        scene.agents.push_back(std::move(track));
    }

    const Json& polygons = array(member(root, "polygons", ""), "polygons");
    for (std::size_t i = 0; i < polygons.size(); ++i) {
        const std::string path = index("polygons", i);
        const Json& p = polygons[i];
        MapPolygon poly;
        poly.polygon_id = string(member(p, "polygon_id", path), join(path, "polygon_id"));
        poly.kind = parse_enum<PolygonKind>(string(member(p, "kind", path), join(path, "kind")), kKindNames,
                                            join(path, "kind"));
        const Json& pts = array(member(p, "points", path), join(path, "points"));
        for (std::size_t k = 0; k < pts.size(); ++k) poly.points.push_back(pose_from(pts[k], index(join(path, "points"), k), 3));
        poly.semantic = parse_enum<LaneType>(string(member(p, "semantic", path), join(path, "semantic")), kLaneTypeNames,
                                             join(path, "semantic"));
        scene.polygons.push_back(std::move(poly));
    }

    const Json& adjacency = array(member(root, "adjacency", ""), "adjacency");
    for (std::size_t e = 0; e < adjacency.size(); ++e) {
        const std::string path = index("adjacency", e);
        const Json& j = adjacency[e];
        PolygonEdge edge;
        edge.source = integer(member(j, "source", path), join(path, "source"));
        edge.target = integer(member(j, "target", path), join(path, "target"));
        edge.relation = parse_enum<Relation>(string(member(j, "relation", path), join(path, "relation")),
                                             kRelationNames, join(path, "relation"));
        scene.adjacency.push_back(edge);
    }

    validate_scene(scene);
    return scene;
}

std::string serialize_scene(const Scene& scene) {
    Json root;
    root["scenario_id"] = scene.scenario_id;
    root["config"] = {{"history_steps", scene.config.history_steps},
                      {"future_steps", scene.config.future_steps},
                      {"num_modes", scene.config.num_modes},
                      {"points_per_polyline", scene.config.points_per_polyline},
                      {"step_period", scene.config.step_period}};
    Json agents = Json::array();
    for (const auto& a : scene.agents) {
        Json states = Json::array();
        for (const auto& s : a.states) states.push_back({s.pose.x, s.pose.y, s.pose.heading, s.velocity});
        Json valid = Json::array();
        for (auto v : a.valid) valid.push_back(v != 0);
        agents.push_back({{"agent_id", a.agent_id},
                          {"agent_type", to_string(a.agent_type)},
                          {"states", std::move(states)},
                          {"valid", std::move(valid)},
                          {"is_target", a.is_target}});
    }
    root["agents"] = std::move(agents);
    Json polygons = Json::array();
    for (const auto& p : scene.polygons) {
        Json pts = Json::array();
        for (const auto& q : p.points) pts.push_back({q.x, q.y, q.heading});
        polygons.push_back({{"polygon_id", p.polygon_id},
                            {"kind", to_string(p.kind)},
                            {"points", std::move(pts)},
                            {"semantic", to_string(p.semantic)}});
    }
    root["polygons"] = std::move(polygons);
    Json adjacency = Json::array();
    for (const auto& e : scene.adjacency)
        adjacency.push_back({{"source", e.source}, {"target", e.target}, {"relation", to_string(e.relation)}});
    root["adjacency"] = std::move(adjacency);
    return root.dump(1) + "\n";
}

Scene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SceneError(SceneError::Kind::Io, "", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_scene(ss.str());
    } catch (const SceneError& e) {
        throw SceneError(e.kind(), e.field(), e.message() + " (in " + path.string() + ")");
    }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SceneError(SceneError::Kind::Io, "", "cannot write " + path.string());
    out << serialize_scene(scene);
    if (!out) throw SceneError(SceneError::Kind::Io, "", "write failed for " + path.string());
}

Scene transform_scene(const Scene& scene, const RigidTransform& g) {
    Scene out = scene;
    for (auto& a : out.agents)
        for (auto& s : a.states) s.pose = g.apply(s.pose);
    for (auto& p : out.polygons)
        for (auto& q : p.points) q = g.apply(q);
    return out;
}

AgentFeatures agent_feature_tensor(const AgentTrack& track, const ProblemConfig& config) {
    const int h = config.history_steps;
    if (static_cast<int>(track.states.size()) < h || static_cast<int>(track.valid.size()) < h)
        throw std::invalid_argument("agent_feature_tensor: track shorter than the history window");
    AgentFeatures f;
    f.motion.assign(h, 0.0);
    f.heading_cos.assign(h, 0.0);
    f.heading_sin.assign(h, 0.0);
    f.velocity.assign(h, 0.0);
    f.valid.assign(h, 0);
    f.motion_valid.assign(h, 0);
    for (int t = 0; t < h; ++t) {
        if (!track.valid[t]) continue;
        const auto& s = track.states[t];
        f.valid[t] = 1;
        f.heading_cos[t] = std::cos(s.pose.heading);
        f.heading_sin[t] = std::sin(s.pose.heading);
        f.velocity[t] = s.velocity;
        if (t > 0 && track.valid[t - 1]) {
            const auto& p = track.states[t - 1].pose;
            f.motion[t] = std::hypot(s.pose.x - p.x, s.pose.y - p.y);
            f.motion_valid[t] = 1;
        }
    }
    return f;
}

}  // namespace lanet
