#include "support.hpp"

#include "lanet/caip.hpp"
#include "lanet/features.hpp"
#include "lanet/nn/grad_check.hpp"

using namespace lanet;

namespace {

Caip make_caip(nn::ParamStore& ps, bool as_printed = false, bool learn_tau = true) {
    return Caip(ps, "caip", kRelFeatureWidth, 8, 1, 0.5, 0.1, learn_tau, as_printed);
}

nn::Matrix random_features(std::mt19937_64& rng, int rows, double spread = 1.0) {
    std::normal_distribution<double> n01(0.0, spread);
    nn::Matrix m(rows, kRelFeatureWidth);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
    return m;
}

/// Candidate edges: `per_query` polygons feeding each of `queries` nodes.
EdgeList dense_edges(int queries, int per_query) {
    EdgeList e;
    for (int q = 0; q < queries; ++q)
        for (int p = 0; p < per_query; ++p) e.push(p, q, RelFeature{});
    return e;
}

nn::Matrix weights_of(const std::vector<double>& scores, const std::vector<int>& targets, int queries, double theta,
                      double tau, double sign) {
    nn::Tape tape(false);
    nn::Matrix s(static_cast<Eigen::Index>(scores.size()), 1);
    for (std::size_t i = 0; i < scores.size(); ++i) s(static_cast<Eigen::Index>(i), 0) = scores[i];
    return soft_weights(tape.constant(s), targets, queries, tape.constant_scalar(theta), tape.constant_scalar(tau), sign)
        .value();
}

}  // namespace

TEST_CASE("scorer: zero parameters give one half, outputs stay inside (0, 1)") {
    nn::ParamStore ps(3);
    const Caip caip = make_caip(ps);
    std::mt19937_64 rng(1);
    const nn::Matrix feats = random_features(rng, 40, 50.0);
    {
        nn::Tape tape(false);
        nn::Graph g{tape, ps};
        const nn::Matrix s = caip.score_edges(g, tape.constant(feats)).value();
        CHECK(s.minCoeff() > 0.0);
        CHECK(s.maxCoeff() < 1.0);
    }
    test::zero_params(ps, "caip.scorer");
    nn::Tape tape(false);
    nn::Graph g{tape, ps};
    CHECK((caip.score_edges(g, tape.constant(feats)).value().array() == 0.5).all());
    CHECK_THROWS_AS(caip.score_edges(g, tape.constant(nn::Matrix::Zero(3, 4))), std::invalid_argument);
}

TEST_CASE("scorer gradients match finite differences") {
    nn::ParamStore ps(5);
    const Caip caip = make_caip(ps);
    std::mt19937_64 rng(2);
    const nn::Matrix feats = random_features(rng, 12);
    const auto report = nn::grad_check(
        [&](nn::Graph& g) { return nn::sum(nn::square(caip.score_edges(g, g.tape.constant(feats)))); }, ps,
        {.prefixes = {"caip.scorer"}});
    for (const auto& f : report.failures) MESSAGE(f);
    CHECK(report.passed());
}

TEST_CASE("theta and tau initialisation and validation") {
    nn::ParamStore ps;
    const Caip caip = make_caip(ps);
    CHECK(caip.theta_value(ps) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(caip.tau_value(ps) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(caip.sign() == 1.0);
    nn::ParamStore ps2;
    CHECK(make_caip(ps2, true, false).sign() == -1.0);
    CHECK_FALSE(ps2.contains("caip.log_tau"));
    nn::ParamStore ps3;
    CHECK_THROWS_AS(Caip(ps3, "c", 6, 4, 1, 1.0, 0.1, true, false), std::invalid_argument);
    CHECK_THROWS_AS(Caip(ps3, "d", 6, 4, 1, 0.5, 0.0, true, false), std::invalid_argument);
    CHECK_THROWS_AS(Caip(ps3, "e", 6, 4, 0, 0.5, 0.1, true, false), std::invalid_argument);
}

TEST_CASE("hard mask extremes and monotonicity") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    std::vector<double> s(200);
    for (auto& x : s) x = u(rng);
    const auto all = hard_mask(s, 1e-9);
    const auto none = hard_mask(s, 1.0 - 1e-9);
    CHECK(std::all_of(all.begin(), all.end(), [](auto m) { return m == 1; }));
    CHECK(std::all_of(none.begin(), none.end(), [](auto m) { return m == 0; }));

    const double grid[] = {0.5, 0.6, 0.7, 0.8};
    auto prev = hard_mask(s, grid[0]);
    for (int i = 1; i < 4; ++i) {
        const auto cur = hard_mask(s, grid[i]);
        for (std::size_t e = 0; e < s.size(); ++e) CHECK(cur[e] <= prev[e]);
        CHECK(std::count(cur.begin(), cur.end(), 1) <= std::count(prev.begin(), prev.end(), 1));
        prev = cur;
    }
    CHECK(hard_mask(std::vector<double>{0.5}, 0.5)[0] == 1);
}

TEST_CASE("soft weights: symmetry, singletons and normalisation") {
    for (double sign : {1.0, -1.0})
        for (double tau : {1e-3, 0.1, 5.0})
            for (double theta : {0.1, 0.5, 0.9}) {
                const nn::Matrix w = weights_of({0.3, 0.3, 0.77}, {0, 0, 1}, 2, theta, tau, sign);
                CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
                CHECK(w(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
                CHECK(w(2, 0) == 1.0);
            }

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> q(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(60);
        std::vector<int> t(60);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = u(rng);
            t[i] = q(rng);
        }
        const nn::Matrix w = weights_of(s, t, 10, u(rng), 0.01 + u(rng), trial % 2 ? 1.0 : -1.0);
        std::vector<double> total(10, 0.0);
        std::vector<int> count(10, 0);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(w(static_cast<Eigen::Index>(i), 0) >= 0.0);
            total[t[i]] += w(static_cast<Eigen::Index>(i), 0);
            ++count[t[i]];
        }
        for (int k = 0; k < 10; ++k)
            if (count[k]) CHECK(std::abs(total[k] - 1.0) < 1e-9);
    }
}

TEST_CASE("soft weights: small temperature limits") {
    SUBCASE("at most one score above theta concentrates on the best edge") {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(0.05, 0.95);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> s(5);
            for (auto& x : s) x = u(rng);
            std::vector<double> sorted = s;
            std::sort(sorted.rbegin(), sorted.rend());
            if (sorted[0] - sorted[1] < 0.01) continue;
            // Threshold above all scores, or between the best and the rest.
            const double theta = trial % 2 ? 0.99 : 0.5 * (sorted[0] + sorted[1]);
            const nn::Matrix w = weights_of(s, {0, 0, 0, 0, 0}, 1, theta, 1e-4, 1.0);
            const auto best = std::max_element(s.begin(), s.end()) - s.begin();
            for (int i = 0; i < 5; ++i) CHECK(std::abs(w(i, 0) - (i == best ? 1.0 : 0.0)) < 1e-6);
            CHECK(w.allFinite());
        }
    }
    SUBCASE("scores above theta share the mass evenly") {
        const nn::Matrix w = weights_of({0.9, 0.7, 0.2}, {0, 0, 0}, 1, 0.5, 1e-4, 1.0);
        CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(w(1, 0) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(w(2, 0) < 1e-100);
    }
    SUBCASE("the printed sign prefers the weakest edge") {
        const nn::Matrix w = weights_of({0.9, 0.6, 0.2}, {0, 0, 0}, 1, 0.1, 1e-4, -1.0);
        CHECK(w(2, 0) > 1.0 - 1e-6);
    }
}

TEST_CASE("soft_weight scales each value row") {
    nn::Tape tape(false);
    nn::Matrix v(3, 2), s(3, 1);
    v << 1, 2, 3, 4, 5, 6;
    s << 0.8, 0.8, 0.4;
    const std::vector<int> t{0, 0, 1};
    const nn::Matrix out = soft_weight(tape.constant(v), tape.constant(s), t, 2, tape.constant_scalar(0.5),
                                       tape.constant_scalar(0.1), 1.0)
                               .value();
    CHECK(out(0, 0) == doctest::Approx(0.5));
    CHECK(out(1, 1) == doctest::Approx(2.0));
    CHECK(out(2, 1) == doctest::Approx(6.0));
}

TEST_CASE("prune keeps masked edges and falls back to the best edge") {
    nn::ParamStore ps(11);
    const Caip caip = make_caip(ps);
    std::mt19937_64 rng(12);
    const EdgeList cand = dense_edges(6, 5);
    const nn::Matrix feats = random_features(rng, 30);
    nn::Tape tape(false);
    nn::Graph g{tape, ps};
    const nn::Matrix s = caip.score_edges(g, tape.constant(feats)).value();

    for (double theta : {0.0, 0.3, 0.5, 0.55, 0.6, 0.7, 0.8, 0.99}) {
        CAPTURE(theta);
        const PrunedEdges p = caip.prune(g, cand, tape.constant(feats), 7, theta);
        CHECK(p.theta == theta);
        REQUIRE(p.valid_mask.size() == cand.size());
        std::size_t kept = 0;
        for (int q = 0; q < 6; ++q) {
            int best = -1, above = 0;
            for (int e = q * 5; e < q * 5 + 5; ++e) {
                if (best < 0 || s(e, 0) > s(best, 0)) best = e;
                above += s(e, 0) >= theta;
            }
            for (int e = q * 5; e < q * 5 + 5; ++e) {
                const bool expect = above > 0 ? s(e, 0) >= theta : e == best;
                CHECK(static_cast<bool>(p.valid_mask[e]) == expect);
                kept += expect;
            }
        }
        REQUIRE(p.kept.size() == kept);
        for (std::size_t i = 0; i < p.kept.size(); ++i) {
            const int e = p.kept_index[i];
            CHECK(p.valid_mask[e]);
            CHECK(p.kept.sources[i] == cand.sources[e]);
            CHECK(p.kept.targets[i] == cand.targets[e]);
            CHECK(p.scores.value()(static_cast<Eigen::Index>(i), 0) == s(e, 0));
        }
        std::vector<double> total(7, 0.0);
        for (std::size_t i = 0; i < p.kept.size(); ++i) total[p.kept.targets[i]] += p.weights.value()(static_cast<Eigen::Index>(i), 0);
        for (int q = 0; q < 6; ++q) CHECK(std::abs(total[q] - 1.0) < 1e-9);
        CHECK(total[6] == 0.0);
    }
    CHECK_THROWS_AS(caip.prune(g, cand, tape.constant(random_features(rng, 4)), 7), std::invalid_argument);
}

TEST_CASE("kept edge sets are nested across the theta grid") {
    nn::ParamStore ps(13);
    const Caip caip = make_caip(ps);
    // Spread scores across (0, 1).
    ps.at("caip.scorer.1.b").value(0, 0) = 0.0;
    std::mt19937_64 rng(14);
    const EdgeList cand = dense_edges(20, 6);
    const nn::Matrix feats = random_features(rng, 120, 3.0);
    nn::Tape tape(false);
    nn::Graph g{tape, ps};
    std::vector<std::uint8_t> prev;
    std::size_t prev_count = cand.size() + 1;
    for (double theta : {0.5, 0.6, 0.7, 0.8}) {
        const PrunedEdges p = caip.prune(g, cand, tape.constant(feats), 20, theta);
        if (!prev.empty())
            for (std::size_t e = 0; e < cand.size(); ++e) CHECK(p.valid_mask[e] <= prev[e]);
        CHECK(p.kept.size() <= prev_count);
        prev = p.valid_mask;
        prev_count = p.kept.size();
    }
}

TEST_CASE("scores are invariant under rigid scene transforms") {
    const ModelConfig cfg = test::toy_config();
    nn::ParamStore ps(15);
    const Caip caip = make_caip(ps);
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 10; ++trial) {
        const Scene scene = synthesize_scene(700 + trial, test::small_spec());
        const Scene moved = transform_scene(scene, test::random_transform(rng));
        auto scores = [&](const Scene& sc) {
            const MapGraph map = build_map_edges(sc, cfg.knn_k);
            const AgentGraph ag = build_agent_graph(sc, map, cfg);
            nn::Tape tape(false);
            nn::Graph g{tape, ps};
            return caip.score_edges(g, tape.constant(rel_matrix(ag.pl2a))).value();
        };
        CHECK(test::max_abs_diff(scores(scene), scores(moved)) < 1e-9);
    }
}

TEST_CASE("theta and tau receive gradient through the soft path") {
    nn::ParamStore ps(17);
    const Caip caip = make_caip(ps);
    ps.at("caip.scorer.1.b").value(0, 0) = 0.0;
    std::mt19937_64 rng(18);
    const EdgeList cand = dense_edges(4, 6);
    const nn::Matrix feats = random_features(rng, 24, 3.0);
    const nn::Matrix vals = random_features(rng, 24);
    auto loss = [&](nn::Graph& g) {
        const PrunedEdges p = caip.prune(g, cand, g.tape.constant(feats), 4);
        nn::Var v = nn::gather_rows(g.tape.constant(vals), p.kept_index);
        nn::Var agg = nn::scatter_add_rows(nn::mul(v, p.weights), p.kept.targets, 4);
        return nn::sum(nn::square(agg));
    };
    {
        nn::Tape tape;
        nn::Graph g{tape, ps};
        const PrunedEdges p = caip.prune(g, cand, tape.constant(feats), 4);
        REQUIRE(p.kept.size() > 4);
        REQUIRE(p.kept.size() < cand.size());
    }
    const auto report = nn::grad_check(loss, ps);
    for (const auto& f : report.failures) MESSAGE(f);
    CHECK(report.passed());
    CHECK(std::abs(ps.at("caip.theta_logit").grad(0, 0)) > 1e-8);
    CHECK(std::abs(ps.at("caip.log_tau").grad(0, 0)) > 1e-8);
}
