#include "lanet/decoder.hpp"

#include "lanet/features.hpp"

#include <cmath>

namespace lanet {

using nn::Var;

DecoderGraph build_decoder_graph(const Scene& scene, const AgentGraph& agents, const MapGraph& map,
                                 const ModelConfig& cfg) {
    DecoderGraph g;
    g.num_modes = cfg.problem.num_modes;
    const int h = scene.config.history_steps;
    for (int a : scene.target_indices()) {
        const int t = scene.agents[a].last_observed(h);
        if (t < 0) throw std::invalid_argument("build_decoder_graph: target " + scene.agents[a].agent_id + " has no observation");
        g.targets.push_back(a);
        g.origin_step.push_back(t);
        g.origin_node.push_back(agents.node(a, t));
        g.origins.push_back(scene.agents[a].states[t].pose);
    }
    for (int q = 0; q < g.num_targets(); ++q) {
        const int a = g.targets[q];
        const int t0 = g.origin_step[q];
        const Pose2& o = g.origins[q];
        for (int s = std::max(0, t0 - cfg.window() + 1); s <= t0; ++s) {
            const int n = agents.node(a, s);
            if (n >= 0) g.temporal.push(n, q, rel_feature(agents.node_pose[n], o, t0 - s));
        }
        for (int j = 0; j < agents.num_agents; ++j) {
            const int n = agents.node(j, t0);
            if (j == a || n < 0) continue;
            const Pose2& p = agents.node_pose[n];
            if (std::hypot(p.x - o.x, p.y - o.y) <= cfg.agent_agent_radius) g.agents.push(n, q, rel_feature(p, o));
        }
    }
    g.map_candidates = radius_graph(map.anchors, g.origins, cfg.agent_map_radius);
    return g;
}

ExpandedEdges expand_to_modes(const EdgeList& edges, int num_modes) {
    ExpandedEdges out;
    for (std::size_t e = 0; e < edges.size(); ++e)
        for (int k = 0; k < num_modes; ++k) {
            out.sources.push_back(edges.sources[e]);
            out.targets.push_back(edges.targets[e] * num_modes + k);
            out.base.push_back(static_cast<int>(e));
        }
    return out;
}

namespace {

Decoder::Block make_block(nn::ParamStore& ps, const std::string& name, const ModelConfig& cfg) {
    const int d = cfg.width;
    return {nn::EdgeAttention(ps, name + ".att_time", d, cfg.heads, d, true),
            nn::EdgeAttention(ps, name + ".att_map", d, cfg.heads, d, true),
            nn::EdgeAttention(ps, name + ".att_agent", d, cfg.heads, d, true),
            nn::EdgeAttention(ps, name + ".att_mode", d, cfg.heads, 0, false)};
}

}  // namespace

Decoder::Decoder(nn::ParamStore& ps, const ModelConfig& cfg)
    : width_(cfg.width),
      modes_(cfg.problem.num_modes),
      horizon_(cfg.problem.future_steps),
      refine_steps_(cfg.refine_steps),
      scale_floor_(cfg.scale_floor) {
    const int d = cfg.width, t = cfg.problem.future_steps;
    mode_emb_ = nn::Embedding(ps, "dec.mode", modes_, d);
    rel_time_ = nn::Mlp(ps, "dec.r_time", {kRelFeatureWidth, d, d});
    rel_map_ = nn::Mlp(ps, "dec.r_map", {kRelFeatureWidth, d, d});
    rel_agent_ = nn::Mlp(ps, "dec.r_agent", {kRelFeatureWidth, d, d});
    propose_block_ = make_block(ps, "dec.propose", cfg);
    refine_block_ = make_block(ps, "dec.refine", cfg);
    auto heads = [&](const std::string& name) {
        return Heads{nn::Mlp(ps, name + ".loc", {d, d, 2 * t}), nn::Mlp(ps, name + ".scale", {d, d, 2 * t}),
                     nn::Mlp(ps, name + ".heading", {d, d, 2 * t}), nn::Mlp(ps, name + ".conf", {d, d, t})};
    };
    propose_heads_ = heads("dec.propose_head");
    refine_heads_ = heads("dec.refine_head");
    traj_embed_ = nn::Mlp(ps, "dec.traj_embed", {2 * t, d, d});
    cls_head_ = nn::Mlp(ps, "dec.cls", {d, d, 1});
}

Decoder::Context Decoder::prepare(nn::Graph& g, const DecoderGraph& graph, const Var& x_agent, const Var& x_map,
                                  const Caip& caip, std::optional<double> theta_override) const {
    Context ctx;
    ctx.graph = &graph;
    ctx.x_agent = x_agent;
    ctx.x_map = x_map;
    ctx.r_time = rel_time_(g, g.tape.constant(rel_matrix(graph.temporal)));
    ctx.r_agent = rel_agent_(g, g.tape.constant(rel_matrix(graph.agents)));
    Var map_feats = g.tape.constant(rel_matrix(graph.map_candidates));
    ctx.pruned = caip.prune(g, graph.map_candidates, map_feats, graph.num_targets(), theta_override);
    ctx.r_map = rel_map_(g, g.tape.constant(rel_matrix(ctx.pruned.kept)));
    return ctx;
}

Var Decoder::run_block(nn::Graph& g, const Block& block, const Var& m, const Context& ctx) const {
    const DecoderGraph& graph = *ctx.graph;
    const int k = graph.num_modes;

    const ExpandedEdges time = expand_to_modes(graph.temporal, k);
    Var x = block.temporal(g, m, ctx.x_agent, time.sources, time.targets, nn::gather_rows(ctx.r_time, time.base));

    const ExpandedEdges map = expand_to_modes(ctx.pruned.kept, k);
    x = block.map(g, x, ctx.x_map, map.sources, map.targets, nn::gather_rows(ctx.r_map, map.base),
                  nn::gather_rows(ctx.pruned.weights, map.base));

    const ExpandedEdges ag = expand_to_modes(graph.agents, k);
    x = block.agents(g, x, ctx.x_agent, ag.sources, ag.targets, nn::gather_rows(ctx.r_agent, ag.base));

    std::vector<int> src, dst;
    for (int q = 0; q < graph.num_targets(); ++q)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                if (i != j) {
                    src.push_back(q * k + j);
                    dst.push_back(q * k + i);
                }
    return block.modes(g, x, x, src, dst);
}

ForecastVars Decoder::decode(nn::Graph& g, const Heads& heads, const Var& m, int num_targets) const {
    const int t = horizon_;
    ForecastVars f;
    f.modes = m;
    Var loc = heads.loc(g, m);
    f.loc_x = nn::slice_cols(loc, 0, t);
    f.loc_y = nn::slice_cols(loc, t, t);
    Var sc = nn::add_scalar(nn::softplus(heads.scale(g, m)), scale_floor_);
    f.scale_x = nn::slice_cols(sc, 0, t);
    f.scale_y = nn::slice_cols(sc, t, t);
    Var hd = heads.heading(g, m);
    f.heading = nn::atan2(nn::slice_cols(hd, 0, t), nn::slice_cols(hd, t, t));
    Var conf_logit = heads.conf(g, m);
    f.heading_conf = nn::sigmoid(conf_logit);
    f.heading_scale = nn::add_scalar(nn::softplus(nn::neg(conf_logit)), scale_floor_);
    nn::Matrix uniform = nn::Matrix::Constant(num_targets, modes_, -std::log(static_cast<double>(modes_)));
    f.log_probs = g.tape.constant(std::move(uniform));
    return f;
}

ForecastVars Decoder::propose(nn::Graph& g, const Context& ctx) const {
    const DecoderGraph& graph = *ctx.graph;
    const int k = graph.num_modes;
    std::vector<int> origin_rows, mode_ids;
    for (int q = 0; q < graph.num_targets(); ++q)
        for (int i = 0; i < k; ++i) {
            origin_rows.push_back(graph.origin_node[q]);
            mode_ids.push_back(i);
        }
    Var m = nn::add(nn::gather_rows(ctx.x_agent, origin_rows), mode_emb_(g, mode_ids));
    m = run_block(g, propose_block_, m, ctx);
    ForecastVars f = decode(g, propose_heads_, m, graph.num_targets());
    // Anchor-free trajectories: per-step offsets accumulated from the origin.
    f.loc_x = nn::cumsum_cols(f.loc_x);
    f.loc_y = nn::cumsum_cols(f.loc_y);
    return f;
}

ForecastVars Decoder::refine(nn::Graph& g, const Context& ctx, const ForecastVars& proposal, int steps) const {
    const DecoderGraph& graph = *ctx.graph;
    Var m = nn::add(proposal.modes, traj_embed_(g, nn::concat_cols({proposal.loc_x, proposal.loc_y})));
    for (int i = 0; i < steps; ++i) m = run_block(g, refine_block_, m, ctx);
    ForecastVars f = decode(g, refine_heads_, m, graph.num_targets());
    f.loc_x = nn::add(proposal.loc_x, f.loc_x);
    f.loc_y = nn::add(proposal.loc_y, f.loc_y);
    Var logits = nn::reshape(cls_head_(g, m), graph.num_targets(), graph.num_modes);
    f.log_probs = nn::log_softmax_rows(logits);
    return f;
}

}  // namespace lanet
