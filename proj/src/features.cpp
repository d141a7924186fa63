#include "lanet/features.hpp"

#include <cmath>

namespace lanet {

nn::Matrix rel_matrix(const EdgeList& edges) {
    nn::Matrix m(static_cast<Eigen::Index>(edges.size()), kRelFeatureWidth);
    for (std::size_t e = 0; e < edges.size(); ++e)
        rel_feature_vector(edges.rel[e], std::span<double, kRelFeatureWidth>(m.row(static_cast<Eigen::Index>(e)).data(),
                                                                            kRelFeatureWidth));
    m.col(0) /= kDistanceUnit;
    return m;
}

nn::Matrix point_features(const Scene& scene) {
    nn::Matrix m(static_cast<Eigen::Index>(scene.num_map_points()), kPointFeatureWidth);
    Eigen::Index row = 0;
    for (const auto& poly : scene.polygons) {
        const auto& pts = poly.points;
        for (std::size_t k = 0; k < pts.size(); ++k, ++row) {
            const std::size_t a = k + 1 < pts.size() ? k : k - 1;
            const double dh = pts[k].heading - poly.anchor().heading;
            m(row, 0) = std::hypot(pts[a + 1].x - pts[a].x, pts[a + 1].y - pts[a].y);
            m(row, 1) = std::cos(dh);
            m(row, 2) = std::sin(dh);
        }
    }
    return m;
}

nn::Matrix polygon_features(const Scene& scene) {
    nn::Matrix m(static_cast<Eigen::Index>(scene.polygons.size()), kPolygonFeatureWidth);
    for (std::size_t i = 0; i < scene.polygons.size(); ++i) {
        const auto& pts = scene.polygons[i].points;
        double length = 0.0;
        for (std::size_t k = 1; k < pts.size(); ++k) length += std::hypot(pts[k].x - pts[k - 1].x, pts[k].y - pts[k - 1].y);
        const double dh = pts.back().heading - pts.front().heading;
        const auto r = static_cast<Eigen::Index>(i);
        m(r, 0) = length;
        m(r, 1) = std::cos(dh);
        m(r, 2) = std::sin(dh);
    }
    return m;
}

void agent_step_features(const AgentFeatures& f, const AgentTrack& track, int t, double* out) {
    const Pose2& p = track.states[t].pose;
    out[0] = f.motion[t];
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = 1.0;
    out[4] = 0.0;
    out[5] = f.velocity[t];
    out[6] = f.motion_valid[t] ? 1.0 : 0.0;
    if (f.motion_valid[t]) {
        const Pose2& q = track.states[t - 1].pose;
        const double dx = p.x - q.x, dy = p.y - q.y;
        const double c = std::cos(p.heading), s = std::sin(p.heading);
        out[1] = c * dx + s * dy;
        out[2] = -s * dx + c * dy;
        out[3] = std::cos(p.heading - q.heading);
        out[4] = std::sin(p.heading - q.heading);
    }
}

}  // namespace lanet
