#include "lanet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace lanet {

namespace {

// mt19937_64 output is specified by the standard; the distributions are not,
// so sampling is done by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal(double sigma) {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
    int index(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }

private:
    std::mt19937_64 engine_;
};

// Reference arc starting at the origin with heading 0.
struct ReferenceArc {
    double curvature;

    double heading(double s) const { return curvature * s; }
    void point(double s, double lateral, double& x, double& y) const {
        double cx, cy;
        if (std::abs(curvature) < 1e-12) {
            cx = s;
            cy = 0.0;
        } else {
            cx = std::sin(curvature * s) / curvature;
            cy = (1.0 - std::cos(curvature * s)) / curvature;
        }
        const double h = heading(s);
        x = cx - std::sin(h) * lateral;
        y = cy + std::cos(h) * lateral;
    }
};

// Point headings follow the chord to the next point (the last point reuses the previous chord).
std::vector<Pose2> polyline(const std::vector<std::pair<double, double>>& xy) {
    std::vector<Pose2> pts;
    for (std::size_t i = 0; i < xy.size(); ++i) {
        const std::size_t a = i + 1 < xy.size() ? i : i - 1;
        const double h = std::atan2(xy[a + 1].second - xy[a].second, xy[a + 1].first - xy[a].first);
        pts.emplace_back(xy[i].first, xy[i].second, h);
    }
    return pts;
}

}  // namespace

void GeneratorSpec::validate() const {
    config.validate();
    auto bad = [](const std::string& m) { throw std::invalid_argument("GeneratorSpec: " + m); };
    if (num_lanes < 1) bad("num_lanes must be >= 1");
    if (segments_per_lane < 1) bad("segments_per_lane must be >= 1");
    if (config.points_per_polyline < 2) bad("points_per_polyline must be >= 2");
    if (!(lane_width > 0.0) || !std::isfinite(lane_width)) bad("lane_width must be > 0");
    if (!(segment_length > 0.0) || !std::isfinite(segment_length)) bad("segment_length must be > 0");
    if (!std::isfinite(max_curvature) || max_curvature < 0.0) bad("max_curvature must be finite and >= 0");
    const double half_width = 0.5 * num_lanes * lane_width + 1.0;
    if (max_curvature * half_width >= 0.5) bad("curvature too high for the road width");
    const double total_length = segment_length * segments_per_lane;
    if (max_curvature * total_length > kPi) bad("road would turn by more than pi");
    if (num_agents < 1) bad("num_agents must be >= 1");
    if (num_targets < 0 || num_targets > num_agents) bad("num_targets must be in [0, num_agents]");
    if (!(min_speed >= 0.0) || !(max_speed >= min_speed) || !std::isfinite(max_speed)) bad("need 0 <= min_speed <= max_speed");
    if (max_speed <= 0.0) bad("max_speed must be > 0");
    if (!(max_accel >= 0.0) || !std::isfinite(max_accel)) bad("max_accel must be >= 0");
    if (lateral_noise < 0.0 || heading_noise < 0.0) bad("noise levels must be >= 0");
    if (history_dropout < 0.0 || history_dropout >= 1.0) bad("history_dropout must be in [0, 1)");
    const double horizon = config.total_steps() * config.step_period;
    // A vehicle at max speed must fit along the road, with 10% slack for the outer lane of a curve.
    if (max_speed * horizon * 1.1 >= total_length) bad("road too short for the speed range and horizon");
}

Scene synthesize_scene(std::uint64_t seed, const GeneratorSpec& spec) {
    spec.validate();
    Rng rng(seed);
    const ProblemConfig& cfg = spec.config;
    const int f = cfg.points_per_polyline;
    const int steps = cfg.total_steps();
    const double dt = cfg.step_period;

    Scene scene;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%08llu", static_cast<unsigned long long>(seed));
    scene.scenario_id = id;
    scene.config = cfg;

    const ReferenceArc arc{rng.uniform(-spec.max_curvature, spec.max_curvature)};
    const double total_length = spec.segment_length * spec.segments_per_lane;
    const double w = spec.lane_width;
    auto lane_offset = [&](int lane) { return (lane - 0.5 * (spec.num_lanes - 1)) * w; };

    auto sample = [&](double s0, double s1, double lateral) {
        std::vector<std::pair<double, double>> xy(f);
        for (int k = 0; k < f; ++k) {
            const double s = s0 + (s1 - s0) * k / (f - 1);
            arc.point(s, lateral, xy[k].first, xy[k].second);
        }
        return polyline(xy);
    };

    // centerline index per (lane, segment)
    std::vector<std::vector<int>> center(spec.num_lanes, std::vector<int>(spec.segments_per_lane));
    auto add_polygon = [&](std::string pid, PolygonKind kind, std::vector<Pose2> pts, LaneType sem) {
        scene.polygons.push_back(MapPolygon{std::move(pid), kind, std::move(pts), sem});
        return static_cast<int>(scene.polygons.size() - 1);
    };
    auto link = [&](int s, int t, Relation r) { scene.adjacency.push_back(PolygonEdge{s, t, r}); };

    for (int lane = 0; lane < spec.num_lanes; ++lane) {
        for (int seg = 0; seg < spec.segments_per_lane; ++seg) {
            const double s0 = seg * spec.segment_length, s1 = s0 + spec.segment_length;
            const std::string base = "lane" + std::to_string(lane) + "_seg" + std::to_string(seg);
            const double o = lane_offset(lane);
            const int c = add_polygon(base + "_center", PolygonKind::LaneCenterline, sample(s0, s1, o), LaneType::Vehicle);
            center[lane][seg] = c;
            const int left = add_polygon(base + "_left", PolygonKind::LaneBoundary, sample(s0, s1, o + 0.5 * w), LaneType::Vehicle);
            const int right = add_polygon(base + "_right", PolygonKind::LaneBoundary, sample(s0, s1, o - 0.5 * w), LaneType::Vehicle);
            link(left, c, Relation::BoundaryOf);
            link(right, c, Relation::BoundaryOf);
        }
    }
    for (int lane = 0; lane < spec.num_lanes; ++lane)
        for (int seg = 0; seg < spec.segments_per_lane; ++seg) {
            if (seg + 1 < spec.segments_per_lane) {
                link(center[lane][seg], center[lane][seg + 1], Relation::Predecessor);
                link(center[lane][seg + 1], center[lane][seg], Relation::Successor);
            }
            if (lane + 1 < spec.num_lanes) {
                link(center[lane + 1][seg], center[lane][seg], Relation::LeftNeighbor);
                link(center[lane][seg], center[lane + 1][seg], Relation::RightNeighbor);
            }
        }
    if (spec.road_edges) {
        const double edge = 0.5 * spec.num_lanes * w + 0.5;
        for (int seg = 0; seg < spec.segments_per_lane; ++seg) {
            const double s0 = seg * spec.segment_length, s1 = s0 + spec.segment_length;
            const std::string base = "road_edge_seg" + std::to_string(seg);
            const int l = add_polygon(base + "_left", PolygonKind::RoadEdge, sample(s0, s1, edge), LaneType::None);
            const int r = add_polygon(base + "_right", PolygonKind::RoadEdge, sample(s0, s1, -edge), LaneType::None);
            link(l, center[spec.num_lanes - 1][seg], Relation::BoundaryOf);
            link(r, center[0][seg], Relation::BoundaryOf);
        }
    }

    // Optional crosswalk perpendicular to the road at a random station.
    int crosswalk = -1;
    double crosswalk_s = 0.0, crosswalk_half = 0.0;
    if (rng.uniform() < spec.crosswalk_probability) {
        crosswalk_s = rng.uniform(0.25, 0.75) * total_length;
        crosswalk_half = 0.5 * spec.num_lanes * w + 1.0;
        std::vector<std::pair<double, double>> xy(f);
        for (int k = 0; k < f; ++k) {
            const double lat = -crosswalk_half + 2.0 * crosswalk_half * k / (f - 1);
            arc.point(crosswalk_s, lat, xy[k].first, xy[k].second);
        }
        crosswalk = add_polygon("crosswalk0", PolygonKind::Crosswalk, polyline(xy), LaneType::Pedestrian);
        const int seg = std::min(spec.segments_per_lane - 1, static_cast<int>(crosswalk_s / spec.segment_length));
        for (int lane = 0; lane < spec.num_lanes; ++lane) {
            link(crosswalk, center[lane][seg], Relation::Crossing);
            link(center[lane][seg], crosswalk, Relation::Crossing);
        }
    }

    const double bound = spec.max_speed * cfg.future_steps * dt;
    const int h = cfg.history_steps;
    for (int i = 0; i < spec.num_agents; ++i) {
        AgentTrack track;
        track.agent_id = "agent" + std::to_string(i);
        const bool pedestrian = crosswalk >= 0 && i >= spec.num_targets && rng.uniform() < spec.pedestrian_probability;
        track.agent_type = pedestrian ? AgentType::Pedestrian : AgentType::Vehicle;
        track.is_target = i < spec.num_targets;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100) throw std::invalid_argument("synthesize_scene: could not place an agent within bounds");
            track.states.assign(steps, AgentState{});
            if (pedestrian) {
                const double speed = rng.uniform(1.0, 1.5);
                const double span = 2.0 * crosswalk_half;
                const double travel = speed * steps * dt;
                const double start = -crosswalk_half + rng.uniform(0.0, std::max(0.0, span - travel));
                const double dir_h = arc.heading(crosswalk_s) + 0.5 * kPi;
                for (int t = 0; t < steps; ++t) {
                    double x, y;
                    arc.point(crosswalk_s + rng.normal(spec.lateral_noise), start + speed * t * dt, x, y);
                    track.states[t] = AgentState{Pose2(x, y, dir_h + rng.normal(spec.heading_noise)), speed};
                }
            } else {
                const int lane = rng.index(spec.num_lanes);
                const double v0 = rng.uniform(spec.min_speed, spec.max_speed);
                const double accel = rng.uniform(-spec.max_accel, spec.max_accel);
                const double offset = lane_offset(lane) + std::clamp(rng.normal(spec.lateral_noise), -0.5, 0.5);
                const double travel_max = spec.max_speed * steps * dt;
                double s = rng.uniform(0.0, total_length - 1.1 * travel_max);
                double v = v0;
                for (int t = 0; t < steps; ++t) {
                    double x, y;
                    const double lat = offset + std::clamp(rng.normal(spec.lateral_noise), -3.0 * spec.lateral_noise,
                                                           3.0 * spec.lateral_noise);
                    arc.point(s, lat, x, y);
                    track.states[t] = AgentState{Pose2(x, y, arc.heading(s) + rng.normal(spec.heading_noise)), v};
                    s += v * dt;
                    v = std::clamp(v + accel * dt, 0.0, spec.max_speed);
                }
            }
            const auto& last = track.states[h - 1].pose;
            const auto& end = track.states[steps - 1].pose;
            if (std::hypot(end.x - last.x, end.y - last.y) <= bound) break;
        }
        track.valid.assign(steps, 1);
        if (!track.is_target)
            for (int t = 0; t + 1 < h; ++t)
                if (rng.uniform() < spec.history_dropout) track.valid[t] = 0;
        scene.agents.push_back(std::move(track));
    }

    if (spec.random_pose) {
        const RigidTransform g{rng.uniform(-kPi, kPi), rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)};
        scene = transform_scene(scene, g);
    }
    validate_scene(scene);
    return scene;
}

}  // namespace lanet
