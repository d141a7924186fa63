#pragma once

#include "lanet/geometry.hpp"
#include "lanet/nn/tape.hpp"
#include "lanet/scene.hpp"

#include <vector>

namespace lanet {

inline constexpr int kPointFeatureWidth = 3;
inline constexpr int kPolygonFeatureWidth = 3;
inline constexpr int kAgentFeatureWidth = 7;

/// Network inputs divide distances by this many scene units.
inline constexpr double kDistanceUnit = 10.0;

/// edges x kRelFeatureWidth matrix of rel_feature_vector rows, distance in kDistanceUnit.
nn::Matrix rel_matrix(const EdgeList& edges);

/// Frame-free per-point features: segment length and tangent relative to the
/// owning polygon's anchor heading. Rows follow polygon order, then point order.
nn::Matrix point_features(const Scene& scene);

/// Frame-free per-polygon features: arc length and end heading relative to the anchor.
nn::Matrix polygon_features(const Scene& scene);

/// Network input for one observed agent step, built only from steps <= t:
/// motion magnitude, motion vector in the step's heading frame, heading change
/// since the previous step (cos, sin), speed, and a motion-valid flag.
void agent_step_features(const AgentFeatures& f, const AgentTrack& track, int t, double* out);

}  // namespace lanet
