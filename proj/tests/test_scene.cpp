#include "support.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace lanet;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SceneError::Kind parse_error_kind(const std::string& text) {
    try {
        parse_scene(text);
    } catch (const SceneError& e) {
        return e.kind();
    }
    FAIL("parse_scene accepted invalid input");
    return SceneError::Kind::Io;
}

nlohmann::ordered_json golden_json() { return nlohmann::ordered_json::parse(read_file(test::data_path("tiny_straight.scene.json"))); }

}  // namespace

TEST_CASE("golden file loads") {
    const Scene s = test::tiny_scene();
    CHECK(s.scenario_id == "tiny_straight");
    CHECK(s.agents.size() == 2);
    CHECK(s.polygons.size() == 3);
    CHECK(s.adjacency.size() == 2);
    CHECK(s.target_indices() == std::vector<int>{0, 1});
    CHECK(s.num_map_points() == 30);
    CHECK(s.agents[0].states[4].pose.x == 2.0);
    CHECK(s.agents[1].states[0].velocity == 2.5);
    CHECK(s.polygons[1].kind == PolygonKind::LaneBoundary);
    CHECK(s.adjacency[0].relation == Relation::BoundaryOf);
}

TEST_CASE("golden file is already in canonical form") {
    const std::string text = read_file(test::data_path("tiny_straight.scene.json"));
    CHECK(serialize_scene(parse_scene(text)) == text);
}

TEST_CASE("save then load reproduces the canonical bytes") {
    const Scene s = synthesize_scene(5, GeneratorSpec{});
    const auto path = std::filesystem::temp_directory_path() / "lanet_roundtrip.scene.json";
    save_scene(s, path);
    const std::string first = read_file(path);
    const Scene back = load_scene(path);
    CHECK(serialize_scene(back) == first);
    save_scene(back, path);
    CHECK(read_file(path) == first);
    std::filesystem::remove(path);
}

TEST_CASE("mismatched states/valid lengths are schema errors") {
    auto doc = golden_json();
    doc["agents"][0]["valid"].erase(doc["agents"][0]["valid"].begin());
    try {
        parse_scene(doc.dump());
        FAIL("expected SceneError");
    } catch (const SceneError& e) {
        CHECK(e.kind() == SceneError::Kind::Schema);
        CHECK(e.field().find("agents[0]") != std::string::npos);
    }
}

TEST_CASE("malformed scenes are rejected with diagnostics") {
    CHECK(parse_error_kind("{ not json") == SceneError::Kind::Parse);
    {
        auto doc = golden_json();
        doc.erase("polygons");
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Schema);
    }
    {
        auto doc = golden_json();
        doc["agents"][0]["agent_type"] = "spaceship";
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Schema);
    }
    {
        auto doc = golden_json();
        doc["adjacency"][0]["target"] = 17;
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Invariant);
    }
    {
        auto doc = golden_json();
        doc["agents"][0]["states"][3][3] = -1.0;
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Invariant);
    }
    {
        auto doc = golden_json();
        doc["polygons"][0]["points"][2][2] = 0.5;
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Invariant);
    }
    {
        auto doc = golden_json();
        doc["adjacency"].erase(doc["adjacency"].begin());
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Invariant);
    }
    {
        auto doc = golden_json();
        for (int t = 0; t < 10; ++t) doc["agents"][1]["valid"][t] = false;
        CHECK(parse_error_kind(doc.dump()) == SceneError::Kind::Invariant);
    }
    CHECK_THROWS_AS(load_scene("/nonexistent/dir/x.scene.json"), SceneError);
}

TEST_CASE("generator is deterministic") {
    const GeneratorSpec spec;
    CHECK(serialize_scene(synthesize_scene(42, spec)) == serialize_scene(synthesize_scene(42, spec)));
    CHECK(serialize_scene(synthesize_scene(42, spec)) != serialize_scene(synthesize_scene(43, spec)));
}

TEST_CASE("straight lanes have constant centerline heading") {
    GeneratorSpec spec;
    spec.max_curvature = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Scene s = synthesize_scene(seed, spec);
        double h0 = 0.0;
        bool first = true;
        for (const auto& p : s.polygons) {
            if (p.kind != PolygonKind::LaneCenterline) continue;
            for (const auto& q : p.points) {
                if (first) {
                    h0 = q.heading;
                    first = false;
                }
                CHECK(std::abs(wrap_angle(q.heading - h0)) < 1e-9);
            }
        }
        CHECK_FALSE(first);
    }
}

TEST_CASE("generated futures respect the kinematic bound") {
    const GeneratorSpec spec;
    const double bound = spec.max_speed * spec.config.future_steps * spec.config.step_period;
    const int h = spec.config.history_steps;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Scene s = synthesize_scene(seed, spec);
        for (const auto& a : s.agents) {
            const int last = a.last_observed(h);
            REQUIRE(last >= 0);
            int end = static_cast<int>(a.states.size()) - 1;
            while (end >= h && !a.valid[end]) --end;
            if (end < h) continue;
            const auto& p = a.states[last].pose;
            const auto& q = a.states[end].pose;
            CHECK(std::hypot(q.x - p.x, q.y - p.y) <= bound + 1e-9);
        }
    }
}

TEST_CASE("lane boundaries are equidistant from their centerline") {
    GeneratorSpec spec;
    spec.max_curvature = 0.03;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Scene s = synthesize_scene(seed, spec);
        std::vector<std::vector<int>> bounds(s.polygons.size());
        for (const auto& e : s.adjacency)
            if (e.relation == Relation::BoundaryOf && s.polygons[e.target].kind == PolygonKind::LaneCenterline)
                bounds[e.target].push_back(e.source);
        for (std::size_t c = 0; c < s.polygons.size(); ++c) {
            if (s.polygons[c].kind != PolygonKind::LaneCenterline) continue;
            REQUIRE(bounds[c].size() == 2);
            const auto& center = s.polygons[c].points;
            const auto& left = s.polygons[bounds[c][0]].points;
            const auto& right = s.polygons[bounds[c][1]].points;
            REQUIRE(left.size() == center.size());
            REQUIRE(right.size() == center.size());
            for (std::size_t i = 0; i < center.size(); ++i) {
                const double dl = std::hypot(left[i].x - center[i].x, left[i].y - center[i].y);
                const double dr = std::hypot(right[i].x - center[i].x, right[i].y - center[i].y);
                CHECK(std::abs(dl - dr) < 1e-6);
                CHECK(std::abs(dl - spec.lane_width / 2) < 1e-6);
            }
        }
    }
}

TEST_CASE("generated scenes pass validation and have targets with futures") {
    const GeneratorSpec spec;
    for (std::uint64_t seed = 100; seed < 200; ++seed) {
        const Scene s = synthesize_scene(seed, spec);
        CHECK_NOTHROW(validate_scene(s));
        CHECK(static_cast<int>(s.target_indices().size()) == spec.num_targets);
        for (int a : s.target_indices()) {
            const auto& v = s.agents[a].valid;
            CHECK(v.back() == 1);
        }
        CHECK_NOTHROW(parse_scene(serialize_scene(s)));
    }
}

TEST_CASE("infeasible generator specs are rejected") {
    GeneratorSpec spec;
    spec.num_lanes = 0;
    CHECK_THROWS_AS(synthesize_scene(0, spec), std::invalid_argument);
    spec = {};
    spec.num_targets = spec.num_agents + 1;
    CHECK_THROWS_AS(synthesize_scene(0, spec), std::invalid_argument);
    spec = {};
    spec.max_curvature = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(synthesize_scene(0, spec), std::invalid_argument);
}

TEST_CASE("transform_scene moves every pose rigidly") {
    const Scene s = test::tiny_scene();
    const RigidTransform g{0.7, 3.0, -2.0};
    const Scene t = transform_scene(s, g);
    CHECK_NOTHROW(validate_scene(t));
    const Pose2 expect = g.apply(s.agents[1].states[5].pose);
    CHECK(t.agents[1].states[5].pose.x == doctest::Approx(expect.x));
    CHECK(t.agents[1].states[5].pose.heading == doctest::Approx(0.7));
    CHECK(t.polygons[2].points[3].y == doctest::Approx(g.apply(s.polygons[2].points[3]).y));
}

TEST_CASE("agent feature tensor: stationary and constant-velocity agents") {
    ProblemConfig cfg;
    AgentTrack still;
    AgentTrack moving;
    for (int t = 0; t < cfg.total_steps(); ++t) {
        still.states.push_back({Pose2(3.0, 4.0, 1.0), 0.0});
        moving.states.push_back({Pose2(static_cast<double>(t), 0.0, 0.0), 10.0});
    }
    still.valid.assign(cfg.total_steps(), 1);
    moving.valid.assign(cfg.total_steps(), 1);
    const AgentFeatures fs = agent_feature_tensor(still, cfg);
    for (double m : fs.motion) CHECK(m == 0.0);
    const AgentFeatures fm = agent_feature_tensor(moving, cfg);
    CHECK(fm.motion[0] == 0.0);
    CHECK(fm.motion_valid[0] == 0);
    for (int t = 1; t < cfg.history_steps; ++t) {
        CHECK(fm.motion[t] == 1.0);
        CHECK(fm.heading_cos[t] == 1.0);
        CHECK(fm.heading_sin[t] == 0.0);
        CHECK(fm.velocity[t] == 10.0);
    }
}

TEST_CASE("agent feature tensor masks gaps") {
    ProblemConfig cfg;
    AgentTrack track;
    for (int t = 0; t < cfg.total_steps(); ++t) track.states.push_back({Pose2(0.5 * t, 0.0, 0.0), 5.0});
    track.valid.assign(cfg.total_steps(), 1);
    track.valid[3] = 0;
    const AgentFeatures f = agent_feature_tensor(track, cfg);
    for (int t = 0; t < cfg.history_steps; ++t) {
        CHECK(f.valid[t] == (t == 3 ? 0 : 1));
        const bool motion = t > 0 && t != 3 && t != 4;
        CHECK(f.motion_valid[t] == (motion ? 1 : 0));
        if (!motion) CHECK(f.motion[t] == 0.0);
    }
}
