#pragma once

#include "lanet/scene.hpp"

#include <cstdint>

namespace lanet {

/// Parameters of the procedural scene generator. Lanes run side by side along
/// a common reference arc of constant curvature; each lane is split into
/// consecutive segments, each segment owning a centerline and two boundaries.
struct GeneratorSpec {
    ProblemConfig config;
    int num_lanes = 2;
    int segments_per_lane = 2;
    double lane_width = 3.5;
    double segment_length = 30.0;
    double max_curvature = 0.02;  // 1/m; curvature is drawn uniformly from [-max, max]
    double crosswalk_probability = 0.5;
    bool road_edges = false;
    int num_agents = 3;
    int num_targets = 2;
    double min_speed = 2.0;
    double max_speed = 8.0;
    double max_accel = 1.0;
    double lateral_noise = 0.05;
    double heading_noise = 0.01;
    double history_dropout = 0.1;  // non-target agents, never the current step
    double pedestrian_probability = 0.3;
    bool random_pose = true;  // place the whole scene under a random rigid transform

    void validate() const;
};

/// Deterministic in (seed, spec).
Scene synthesize_scene(std::uint64_t seed, const GeneratorSpec& spec);

}  // namespace lanet
