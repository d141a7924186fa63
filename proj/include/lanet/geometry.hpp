#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace lanet {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi]. Throws std::invalid_argument on non-finite input.
double wrap_angle(double a);

struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;

    Pose2() = default;
    /// Heading is wrapped on construction.
    Pose2(double x_, double y_, double heading_);

    bool operator==(const Pose2&) const = default;
};

/// A rigid planar motion: rotate by `angle`, then translate by (tx, ty).
struct RigidTransform {
    double angle = 0.0;
    double tx = 0.0;
    double ty = 0.0;

    Pose2 apply(const Pose2& p) const;
    void apply_point(double& x, double& y) const;
};

/// Relative geometry between two poses, expressed so that it does not depend
/// on the global frame.
struct RelFeature {
    double distance = 0.0;
    double orientation_diff = 0.0;
    double bearing = 0.0;  // direction to dst, in the src frame
    int time_gap = 0;

    bool operator==(const RelFeature&) const = default;
};

/// Width of the continuous encoding produced by `rel_feature_vector`.
inline constexpr int kRelFeatureWidth = 6;

RelFeature rel_feature(const Pose2& src, const Pose2& dst, int dt = 0);

/// Continuous encoding (distance, cos/sin orientation_diff, cos/sin bearing, time_gap).
/// Angles are fed as unit vectors so the encoding has no seam at +-pi.
void rel_feature_vector(const RelFeature& r, std::span<double, kRelFeatureWidth> out);

struct EdgeList {
    std::vector<int> sources;
    std::vector<int> targets;
    std::vector<RelFeature> rel;

    std::size_t size() const { return sources.size(); }
    bool empty() const { return sources.empty(); }
    void push(int s, int t, const RelFeature& r) {
        sources.push_back(s);
        targets.push_back(t);
        rel.push_back(r);
    }
    /// Throws std::invalid_argument when lengths disagree or indices fall outside the node sets.
    void validate(std::size_t num_sources, std::size_t num_targets, bool allow_self_loops = false) const;
};

/// Directed KNN graph: each node receives edges from its min(k, n-1) nearest
/// neighbours (ties to the lower index; squared distances within a relative
/// 1e-9 count as tied). Edges are grouped by target, nearest first.
EdgeList knn_graph(std::span<const Pose2> points, int k);

/// Bipartite radius graph: edge (s, t) iff |s - t| <= radius and both are valid.
/// Empty masks mean "all valid". Edges are ordered by target, then source.
EdgeList radius_graph(std::span<const Pose2> sources, std::span<const Pose2> targets, double radius,
                      std::span<const std::uint8_t> source_valid = {},
                      std::span<const std::uint8_t> target_valid = {});

}  // namespace lanet
