#include "support.hpp"

#include "lanet/decoder.hpp"
#include "lanet/nn/grad_check.hpp"

#include <set>

using namespace lanet;

namespace {

struct Raw {
    nn::Matrix loc_x, scale_x, scale_y, heading, heading_conf, heading_scale;
};

struct Run {
    std::vector<Forecast> proposal, refined;
    nn::Matrix log_probs;
    Raw raw;  // refined outputs in the target frames
};

Run run(LanetModel& model, const PreparedScene& ps, const ForwardOptions& opts = {}) {
    nn::Tape tape(false);
    const ModelOutput out = model.forward(tape, ps, opts);
    const ForecastVars& f = out.refined;
    return {to_forecasts(out.proposal, ps), to_forecasts(f, ps), f.log_probs.value(),
            {f.loc_x.value(), f.scale_x.value(), f.scale_y.value(), f.heading.value(), f.heading_conf.value(),
             f.heading_scale.value()}};
}

Scene scene_for(std::uint64_t seed) { return synthesize_scene(seed, test::small_spec()); }

}  // namespace

TEST_CASE("decoder graph follows the last observed step of each target") {
    const ModelConfig cfg = test::toy_config();
    Scene scene = scene_for(5);
    const int h = scene.config.history_steps;
    const MapGraph map = build_map_edges(scene, cfg.knn_k);
    const AgentGraph ag = build_agent_graph(scene, map, cfg);
    const DecoderGraph g = build_decoder_graph(scene, ag, map, cfg);
    REQUIRE(g.targets == scene.target_indices());
    CHECK(g.num_modes == cfg.problem.num_modes);
    CHECK(g.num_queries() == g.num_targets() * g.num_modes);
    for (int q = 0; q < g.num_targets(); ++q) {
        const AgentTrack& tr = scene.agents[g.targets[q]];
        CHECK(g.origin_step[q] == tr.last_observed(h));
        CHECK(g.origin_node[q] == ag.node(g.targets[q], g.origin_step[q]));
        CHECK(g.origins[q].x == tr.states[g.origin_step[q]].pose.x);
    }
    std::set<std::pair<int, int>> temporal;
    for (std::size_t e = 0; e < g.temporal.size(); ++e) {
        const int q = g.temporal.targets[e];
        CHECK(ag.node_agent[g.temporal.sources[e]] == g.targets[q]);
        CHECK(g.temporal.rel[e].time_gap == g.origin_step[q] - ag.node_step[g.temporal.sources[e]]);
        temporal.insert({g.temporal.sources[e], q});
    }
    for (int q = 0; q < g.num_targets(); ++q)
        for (int t = 0; t <= g.origin_step[q]; ++t) {
            const int n = ag.node(g.targets[q], t);
            CHECK(temporal.count({n, q}) == (n >= 0 ? 1u : 0u));
        }
    for (std::size_t e = 0; e < g.agents.size(); ++e) {
        const int q = g.agents.targets[e];
        CHECK(ag.node_step[g.agents.sources[e]] == g.origin_step[q]);
        CHECK(ag.node_agent[g.agents.sources[e]] != g.targets[q]);
    }
    const EdgeList oracle = radius_graph(map.anchors, g.origins, cfg.agent_map_radius);
    CHECK(g.map_candidates.sources == oracle.sources);
    CHECK(g.map_candidates.targets == oracle.targets);

    const int target = g.targets[0];
    std::fill(scene.agents[target].valid.begin(), scene.agents[target].valid.begin() + h, 0);
    CHECK_THROWS_AS(build_decoder_graph(scene, ag, map, cfg), std::invalid_argument);
}

TEST_CASE("edges are replicated to every mode query") {
    EdgeList e;
    e.push(4, 0, RelFeature{});
    e.push(7, 1, RelFeature{});
    const ExpandedEdges x = expand_to_modes(e, 3);
    CHECK(x.sources == std::vector<int>{4, 4, 4, 7, 7, 7});
    CHECK(x.targets == std::vector<int>{0, 1, 2, 3, 4, 5});
    CHECK(x.base == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("zero location head degenerates to the last observed position") {
    LanetModel model(test::toy_config(), 3);
    test::zero_params(model.params(), "dec.propose_head.loc");
    const PreparedScene ps = prepare_scene(scene_for(8), model.config());
    const Run r = run(model, ps);
    for (const Forecast& f : r.proposal)
        for (int k = 0; k < f.num_modes(); ++k)
            for (int t = 0; t < f.horizon(); ++t) {
                CHECK(f.loc_x(k, t) == doctest::Approx(f.origin.x).epsilon(1e-12));
                CHECK(f.loc_y(k, t) == doctest::Approx(f.origin.y).epsilon(1e-12));
            }
}

TEST_CASE("single mode: mode self-attention has nothing to attend to") {
    ModelConfig cfg = test::toy_config();
    cfg.problem.num_modes = 1;
    LanetModel model(cfg, 4);
    Scene scene = scene_for(9);
    scene.config.num_modes = 1;
    const PreparedScene ps = prepare_scene(scene, cfg);
    const Run a = run(model, ps);
    for (const char* w : {"q", "k", "v", "o"}) model.params().at(std::string("dec.propose.att_mode.") + w + ".w").value *= 3.0;
    const Run b = run(model, ps);
    CHECK(test::max_abs_diff(a.proposal[0].loc_x, b.proposal[0].loc_x) == 0.0);
    CHECK(a.refined[0].probs.size() == 1);
    CHECK(a.refined[0].probs[0] == 1.0);
}

TEST_CASE("forecasts are equivariant under rigid transforms") {
    LanetModel model(test::toy_config(), 5);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        const Scene scene = scene_for(40 + trial);
        const RigidTransform g = test::random_transform(rng);
        const Run a = run(model, prepare_scene(scene, model.config()));
        const Run b = run(model, prepare_scene(transform_scene(scene, g), model.config()));
        const double c = std::cos(g.angle), s = std::sin(g.angle);
        for (std::size_t q = 0; q < a.refined.size(); ++q)
            for (const auto* pair : {&a.proposal, &a.refined}) {
                const Forecast& fa = (*pair)[q];
                const Forecast& fb = (pair == &a.proposal ? b.proposal : b.refined)[q];
                nn::Matrix ex = (c * fa.loc_x.array() - s * fa.loc_y.array() + g.tx).matrix();
                nn::Matrix ey = (s * fa.loc_x.array() + c * fa.loc_y.array() + g.ty).matrix();
                CHECK(test::max_abs_diff(ex, fb.loc_x) < 1e-4);
                CHECK(test::max_abs_diff(ey, fb.loc_y) < 1e-4);
                double worst = 0.0;
                for (Eigen::Index i = 0; i < fa.heading.size(); ++i)
                    worst = std::max(worst, std::abs(wrap_angle(fa.heading.data()[i] + g.angle - fb.heading.data()[i])));
                CHECK(worst < 1e-4);
                CHECK(test::max_abs_diff(fa.scale_x, fb.scale_x) < 1e-4);
                for (std::size_t k = 0; k < fa.probs.size(); ++k) CHECK(std::abs(fa.probs[k] - fb.probs[k]) < 1e-6);
            }
    }
}

TEST_CASE("identity refinement reproduces the proposal") {
    LanetModel model(test::toy_config(), 7);
    test::zero_params(model.params(), "dec.refine_head.loc");
    const PreparedScene ps = prepare_scene(scene_for(10), model.config());
    ForwardOptions opts;
    opts.refine_steps = 0;
    const Run r = run(model, ps, opts);
    for (std::size_t q = 0; q < r.proposal.size(); ++q) {
        CHECK(test::max_abs_diff(r.proposal[q].loc_x, r.refined[q].loc_x) == 0.0);
        CHECK(test::max_abs_diff(r.proposal[q].loc_y, r.refined[q].loc_y) == 0.0);
    }
}

TEST_CASE("output ranges hold for any parameters") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 5; ++trial) {
        LanetModel model(test::toy_config(), 100 + trial);
        // Blow the heads up so every transform is pushed towards its limits.
        for (auto& [name, p] : model.params())
            if (name.find("head") != std::string::npos || name.rfind("dec.cls", 0) == 0)
                for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = 20.0 * u(rng);
        const PreparedScene ps = prepare_scene(scene_for(60 + trial), model.config());
        const Run r = run(model, ps);
        const double floor = model.config().scale_floor;
        CHECK(r.raw.scale_x.minCoeff() >= floor);
        CHECK(r.raw.scale_y.minCoeff() >= floor);
        CHECK(r.raw.heading_scale.minCoeff() >= floor);
        CHECK(r.raw.heading_conf.minCoeff() >= 0.0);
        CHECK(r.raw.heading_conf.maxCoeff() <= 1.0);
        CHECK(r.raw.heading.cwiseAbs().maxCoeff() <= kPi);
        for (const Forecast& f : r.refined) {
            double total = 0.0;
            for (double p : f.probs) {
                CHECK(p >= 0.0);
                total += p;
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
        for (Eigen::Index q = 0; q < r.log_probs.rows(); ++q)
            CHECK(std::abs(r.log_probs.row(q).array().exp().sum() - 1.0) < 1e-9);
    }
}

TEST_CASE("identical mode embeddings give identical modes") {
    LanetModel model(test::toy_config(), 12);
    nn::Matrix& table = model.params().at("dec.mode.table").value;
    for (Eigen::Index k = 1; k < table.rows(); ++k) table.row(k) = table.row(0);
    const PreparedScene ps = prepare_scene(scene_for(13), model.config());
    const Run r = run(model, ps);
    for (const Forecast& f : r.refined) {
        for (int k = 1; k < f.num_modes(); ++k) {
            CHECK(test::max_abs_diff(f.loc_x.row(k), f.loc_x.row(0)) < 1e-12);
            CHECK(test::max_abs_diff(f.loc_y.row(k), f.loc_y.row(0)) < 1e-12);
            CHECK(std::abs(f.probs[k] - f.probs[0]) < 1e-12);
        }
    }
    // The distinct default table does separate them.
    LanetModel fresh(test::toy_config(), 12);
    const Run d = run(fresh, ps);
    CHECK(test::max_abs_diff(d.refined[0].loc_x.row(0), d.refined[0].loc_x.row(1)) > 1e-9);
}

TEST_CASE("forward is deterministic") {
    LanetModel a(test::toy_config(), 14), b(test::toy_config(), 14);
    const PreparedScene ps = prepare_scene(scene_for(15), a.config());
    const Run x = run(a, ps), y = run(b, ps), z = run(a, ps);
    CHECK(test::max_abs_diff(x.raw.loc_x, y.raw.loc_x) == 0.0);
    CHECK(test::max_abs_diff(x.raw.loc_x, z.raw.loc_x) == 0.0);
    CHECK(test::max_abs_diff(x.log_probs, y.log_probs) == 0.0);
}

TEST_CASE("refined output gradients with respect to the proposal match finite differences") {
    ModelConfig cfg = test::toy_config(4);
    LanetModel model(cfg, 16);
    const PreparedScene ps = prepare_scene(scene_for(17), cfg);
    nn::Tape base(false);
    const ModelOutput out = model.forward(base, ps);
    model.params().create("probe.loc_x", static_cast<int>(out.proposal.loc_x.rows()), cfg.problem.future_steps).value =
        out.proposal.loc_x.value();
    model.params().create("probe.loc_y", static_cast<int>(out.proposal.loc_y.rows()), cfg.problem.future_steps).value =
        out.proposal.loc_y.value();

    std::mt19937_64 rng(18);
    std::normal_distribution<double> n01;
    nn::Matrix w(out.refined.loc_x.rows(), out.refined.loc_x.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n01(rng);

    const Decoder& dec = model.decoder();
    nn::GradCheckOptions opts;
    opts.prefixes = {"probe."};
    opts.max_entries_per_param = 30;
    const auto report = nn::grad_check(
        [&](nn::Graph& g) {
            nn::Var x_map = g.tape.constant(out.x_map.value());
            nn::Var x_agent = g.tape.constant(out.x_agent.value());
            const Decoder::Context ctx = dec.prepare(g, ps.decoder, x_agent, x_map, model.caip());
            ForecastVars prop = dec.propose(g, ctx);
            prop.loc_x = g.param("probe.loc_x");
            prop.loc_y = g.param("probe.loc_y");
            const ForecastVars ref = dec.refine(g, ctx, prop);
            nn::Var c = g.tape.constant(w);
            return nn::add(nn::sum(nn::mul(ref.loc_x, c)), nn::add(nn::sum(nn::mul(ref.loc_y, c)), nn::sum(ref.log_probs)));
        },
        model.params(), opts);
    for (const auto& f : report.failures) MESSAGE(f);
    CHECK(report.passed());
    CHECK(report.checked == 60);
}

TEST_CASE("prepare_scene rejects mismatched windows") {
    ModelConfig cfg = test::toy_config();
    cfg.problem.future_steps = 12;
    CHECK_THROWS(prepare_scene(scene_for(1), cfg));
}
