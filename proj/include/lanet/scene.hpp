#pragma once

#include "lanet/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lanet {

struct ProblemConfig {
    int history_steps = 10;
    int future_steps = 20;
    int num_modes = 6;
    int points_per_polyline = 10;
    double step_period = 0.1;

    int total_steps() const { return history_steps + future_steps; }
    void validate() const;
    bool operator==(const ProblemConfig&) const = default;
};

enum class AgentType { Vehicle, Pedestrian, Cyclist, Bus, Motorcyclist, Other };
inline constexpr int kNumAgentTypes = 6;

enum class PolygonKind { LaneCenterline, LaneBoundary, Crosswalk, RoadEdge };
inline constexpr int kNumPolygonKinds = 4;

enum class LaneType { Vehicle, Bike, Bus, Pedestrian, None };
inline constexpr int kNumLaneTypes = 5;

/// Role of the edge source with respect to the edge target
/// (e.g. boundary --boundary_of--> centerline).
enum class Relation { Predecessor, Successor, LeftNeighbor, RightNeighbor, BoundaryOf, Crossing };
inline constexpr int kNumRelations = 6;

const char* to_string(AgentType t);
const char* to_string(PolygonKind k);
const char* to_string(LaneType t);
const char* to_string(Relation r);

struct AgentState {
    Pose2 pose;
    double velocity = 0.0;
};

struct AgentTrack {
    std::string agent_id;
    AgentType agent_type = AgentType::Vehicle;
    std::vector<AgentState> states;  // history then future, length H + T
    std::vector<std::uint8_t> valid;
    bool is_target = false;

    /// Index of the last valid observed step, or -1.
    int last_observed(int history_steps) const;
};

struct MapPolygon {
    std::string polygon_id;
    PolygonKind kind = PolygonKind::LaneCenterline;
    std::vector<Pose2> points;
    LaneType semantic = LaneType::None;

    const Pose2& anchor() const { return points.front(); }
};

struct PolygonEdge {
    int source = 0;
    int target = 0;
    Relation relation = Relation::Successor;
};

struct Scene {
    std::string scenario_id;
    ProblemConfig config;
    std::vector<AgentTrack> agents;
    std::vector<MapPolygon> polygons;
    std::vector<PolygonEdge> adjacency;

    std::vector<int> target_indices() const;
    std::size_t num_map_points() const;
};

class SceneError : public std::runtime_error {
public:
    enum class Kind { Io, Parse, Schema, Invariant };
    SceneError(Kind kind, std::string field, const std::string& message);

    Kind kind() const { return kind_; }
    /// Dotted path of the offending field ("agents[1].valid"), empty when not field-specific.
    const std::string& field() const { return field_; }
    const std::string& message() const { return message_; }

private:
    Kind kind_;
    std::string field_;
    std::string message_;
};

/// Throws SceneError(Invariant | Schema) describing the first violation.
void validate_scene(const Scene& scene);

Scene parse_scene(const std::string& text);
std::string serialize_scene(const Scene& scene);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

/// Applies g to every pose in the scene.
Scene transform_scene(const Scene& scene, const RigidTransform& g);

/// Per-step agent features over the observed window.
struct AgentFeatures {
    std::vector<double> motion;       // |p_t - p_{t-1}|, 0 when unavailable
    std::vector<double> heading_cos;
    std::vector<double> heading_sin;
    std::vector<double> velocity;
    std::vector<std::uint8_t> valid;         // step observed
    std::vector<std::uint8_t> motion_valid;  // step and its predecessor observed
};

AgentFeatures agent_feature_tensor(const AgentTrack& track, const ProblemConfig& config);

}  // namespace lanet
