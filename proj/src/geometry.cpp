#include "lanet/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lanet {

double wrap_angle(double a) {
    if (!std::isfinite(a)) throw std::invalid_argument("wrap_angle: non-finite angle");
    constexpr double two_pi = 2.0 * kPi;
    double r = std::fmod(a, two_pi);  // (-2pi, 2pi)
    if (r > kPi) r -= two_pi;
    else if (r <= -kPi) r += two_pi;
    return r;
}

Pose2::Pose2(double x_, double y_, double heading_) : x(x_), y(y_), heading(wrap_angle(heading_)) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw std::invalid_argument("Pose2: non-finite position");
}

Pose2 RigidTransform::apply(const Pose2& p) const {
    double x = p.x, y = p.y;
    apply_point(x, y);
    return Pose2(x, y, p.heading + angle);
}

void RigidTransform::apply_point(double& x, double& y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double nx = c * x - s * y + tx;
    const double ny = s * x + c * y + ty;
    x = nx;
    y = ny;
}

RelFeature rel_feature(const Pose2& src, const Pose2& dst, int dt) {
    if (!std::isfinite(src.x) || !std::isfinite(src.y) || !std::isfinite(dst.x) || !std::isfinite(dst.y))
        throw std::invalid_argument("rel_feature: non-finite pose");
    if (dt < 0) throw std::invalid_argument("rel_feature: negative time gap");
    const double dx = dst.x - src.x;
    const double dy = dst.y - src.y;
    RelFeature r;
    r.distance = std::hypot(dx, dy);
    r.orientation_diff = wrap_angle(dst.heading - src.heading);
    r.bearing = r.distance > 0.0 ? wrap_angle(std::atan2(dy, dx) - src.heading) : 0.0;
    r.time_gap = dt;
    return r;
}

void rel_feature_vector(const RelFeature& r, std::span<double, kRelFeatureWidth> out) {
    out[0] = r.distance;
    out[1] = std::cos(r.orientation_diff);
    out[2] = std::sin(r.orientation_diff);
    out[3] = std::cos(r.bearing);
    out[4] = std::sin(r.bearing);
    out[5] = static_cast<double>(r.time_gap);
}

void EdgeList::validate(std::size_t num_sources, std::size_t num_targets, bool allow_self_loops) const {
    if (sources.size() != targets.size() || sources.size() != rel.size())
        throw std::invalid_argument("EdgeList: sources/targets/rel lengths differ");
    for (std::size_t e = 0; e < sources.size(); ++e) {
        const int s = sources[e], t = targets[e];
        if (s < 0 || static_cast<std::size_t>(s) >= num_sources || t < 0 || static_cast<std::size_t>(t) >= num_targets)
            throw std::invalid_argument("EdgeList: index out of range at edge " + std::to_string(e));
        if (!allow_self_loops && s == t && num_sources == num_targets)
            throw std::invalid_argument("EdgeList: self-loop at edge " + std::to_string(e));
    }
}

namespace {
constexpr double kTieTolerance = 1e-9;
}  // namespace

EdgeList knn_graph(std::span<const Pose2> points, int k) {
    const int n = static_cast<int>(points.size());
    if (k < 1) throw std::invalid_argument("knn_graph: k must be >= 1");
    if (n < 2) throw std::invalid_argument("knn_graph: need at least two points");
    const int kk = std::min(k, n - 1);

    EdgeList out;
    out.sources.reserve(static_cast<std::size_t>(n) * kk);
    out.targets.reserve(static_cast<std::size_t>(n) * kk);
    out.rel.reserve(static_cast<std::size_t>(n) * kk);

    std::vector<double> d2(n);
    std::vector<int> order(n - 1);
    for (int t = 0; t < n; ++t) {
        for (int j = 0; j < n; ++j) {
            const double dx = points[j].x - points[t].x, dy = points[j].y - points[t].y;
            d2[j] = dx * dx + dy * dy;
        }
        int w = 0;
        for (int j = 0; j < n; ++j)
            if (j != t) order[w++] = j;
        auto closer = [&](int a, int b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
        std::sort(order.begin(), order.end(), closer);
        // Distances equal up to round-off form one tie group ordered by index,
        // so a rigid transform of the input cannot reorder them.
        for (int lo = 0; lo < kk;) {
            int hi = lo + 1;
            while (hi < n - 1 && d2[order[hi]] - d2[order[hi - 1]] <= kTieTolerance * std::max(1.0, d2[order[hi]])) ++hi;
            std::sort(order.begin() + lo, order.begin() + hi);
            lo = hi;
        }
        for (int i = 0; i < kk; ++i) out.push(order[i], t, rel_feature(points[order[i]], points[t]));
    }
    return out;
}

EdgeList radius_graph(std::span<const Pose2> sources, std::span<const Pose2> targets, double radius,
                      std::span<const std::uint8_t> source_valid, std::span<const std::uint8_t> target_valid) {
    if (!(radius > 0.0)) throw std::invalid_argument("radius_graph: radius must be > 0");
    if (!source_valid.empty() && source_valid.size() != sources.size())
        throw std::invalid_argument("radius_graph: source mask length mismatch");
    if (!target_valid.empty() && target_valid.size() != targets.size())
        throw std::invalid_argument("radius_graph: target mask length mismatch");
    EdgeList out;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (!target_valid.empty() && !target_valid[t]) continue;
        for (std::size_t s = 0; s < sources.size(); ++s) {
            if (!source_valid.empty() && !source_valid[s]) continue;
            const double dx = sources[s].x - targets[t].x, dy = sources[s].y - targets[t].y;
            if (std::hypot(dx, dy) <= radius)
                out.push(static_cast<int>(s), static_cast<int>(t), rel_feature(sources[s], targets[t]));
        }
    }
    return out;
}

}  // namespace lanet
