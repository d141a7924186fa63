#include "lanet/agent_encoder.hpp"

#include "lanet/features.hpp"

namespace lanet {

using nn::Var;

EdgeList build_temporal_edges(const AgentTrack& track, int history_steps, int window) {
    if (window < 1) throw std::invalid_argument("build_temporal_edges: window must be >= 1");
    EdgeList out;
    const int h = std::min<int>(history_steps, static_cast<int>(track.valid.size()));
    for (int t = 0; t < h; ++t) {
        if (!track.valid[t]) continue;
        for (int s = std::max(0, t - window); s < t; ++s) {
            if (!track.valid[s]) continue;
            out.push(s, t, rel_feature(track.states[s].pose, track.states[t].pose, t - s));
        }
    }
    return out;
}

EdgeList build_agent_map_edges(const AgentGraph& graph, const MapGraph& map, double radius) {
    return radius_graph(map.anchors, graph.node_pose, radius);
}

EdgeList build_agent_agent_edges(const AgentGraph& graph, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("build_agent_agent_edges: radius must be > 0");
    EdgeList out;
    for (int t = 0; t < graph.history_steps; ++t) {
        for (int dst = 0; dst < graph.num_agents; ++dst) {
            const int nd = graph.node(dst, t);
            if (nd < 0) continue;
            for (int src = 0; src < graph.num_agents; ++src) {
                const int ns = graph.node(src, t);
                if (src == dst || ns < 0) continue;
                const Pose2& a = graph.node_pose[ns];
                const Pose2& b = graph.node_pose[nd];
                if (std::hypot(a.x - b.x, a.y - b.y) <= radius) out.push(ns, nd, rel_feature(a, b));
            }
        }
    }
    return out;
}

AgentGraph build_agent_graph(const Scene& scene, const MapGraph& map, const ModelConfig& cfg) {
    AgentGraph g;
    const int h = scene.config.history_steps;
    g.num_agents = static_cast<int>(scene.agents.size());
    g.history_steps = h;
    g.node_index.assign(static_cast<std::size_t>(g.num_agents) * h, -1);
    for (int a = 0; a < g.num_agents; ++a) {
        const auto& track = scene.agents[a];
        for (int t = 0; t < h; ++t) {
            if (!track.valid[t]) continue;
            g.node_index[a * h + t] = static_cast<int>(g.node_agent.size());
            g.node_agent.push_back(a);
            g.node_step.push_back(t);
            g.node_pose.push_back(track.states[t].pose);
        }
    }
    for (int a = 0; a < g.num_agents; ++a) {
        EdgeList local = build_temporal_edges(scene.agents[a], h, cfg.window());
        for (std::size_t e = 0; e < local.size(); ++e)
            g.t2t.push(g.node(a, local.sources[e]), g.node(a, local.targets[e]), local.rel[e]);
    }
    g.pl2a = build_agent_map_edges(g, map, cfg.agent_map_radius);
    g.a2a = build_agent_agent_edges(g, cfg.agent_agent_radius);
    return g;
}

AgentEncoder::AgentEncoder(nn::ParamStore& ps, const ModelConfig& cfg) : rounds_(cfg.encoder_rounds) {
    const int d = cfg.width;
    type_ = nn::Embedding(ps, "agent.type", kNumAgentTypes, d);
    in_ = nn::Mlp(ps, "agent.in", {kAgentFeatureWidth, d, d});
    rel_t2t_ = nn::Mlp(ps, "agent.r_t2t", {kRelFeatureWidth, d, d});
    rel_pl2a_ = nn::Mlp(ps, "agent.r_pl2a", {kRelFeatureWidth, d, d});
    rel_a2a_ = nn::Mlp(ps, "agent.r_a2a", {kRelFeatureWidth, d, d});
    att_t2t_ = nn::EdgeAttention(ps, "agent.att_t2t", d, cfg.heads, d, false);
    att_pl2a_ = nn::EdgeAttention(ps, "agent.att_pl2a", d, cfg.heads, d, true);
    att_a2a_ = nn::EdgeAttention(ps, "agent.att_a2a", d, cfg.heads, d, false);
}

Var AgentEncoder::embed(nn::Graph& g, const Scene& scene, const AgentGraph& graph) const {
    const auto n = static_cast<Eigen::Index>(graph.num_nodes());
    nn::Matrix feats(n, kAgentFeatureWidth);
    std::vector<int> types(graph.num_nodes());
    std::vector<AgentFeatures> per_agent;
    per_agent.reserve(scene.agents.size());
    for (const auto& track : scene.agents) per_agent.push_back(agent_feature_tensor(track, scene.config));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int a = graph.node_agent[i];
        agent_step_features(per_agent[a], scene.agents[a], graph.node_step[i], feats.row(i).data());
        types[i] = static_cast<int>(scene.agents[a].agent_type);
    }
    return nn::add(in_(g, g.tape.constant(std::move(feats))), type_(g, types));
}

AgentEncoder::Encodings AgentEncoder::encode_relations(nn::Graph& g, const AgentGraph& graph) const {
    return {rel_t2t_(g, g.tape.constant(rel_matrix(graph.t2t))), rel_pl2a_(g, g.tape.constant(rel_matrix(graph.pl2a))),
            rel_a2a_(g, g.tape.constant(rel_matrix(graph.a2a)))};
}

Var AgentEncoder::temporal_attention(nn::Graph& g, const Var& x, const AgentGraph& graph, const Var& r_t2t) const {
    return att_t2t_(g, x, x, graph.t2t.sources, graph.t2t.targets, r_t2t);
}

Var AgentEncoder::agent_map_attention(nn::Graph& g, const Var& x_map, const Var& x, const AgentGraph& graph,
                                      const Var& r_pl2a, const PrunedEdges* pruned) const {
    if (!pruned) return att_pl2a_(g, x, x_map, graph.pl2a.sources, graph.pl2a.targets, r_pl2a);
    Var r = nn::gather_rows(r_pl2a, pruned->kept_index);
    return att_pl2a_(g, x, x_map, pruned->kept.sources, pruned->kept.targets, r, pruned->weights);
}

Var AgentEncoder::agent_agent_attention(nn::Graph& g, const Var& x, const AgentGraph& graph, const Var& r_a2a) const {
    return att_a2a_(g, x, x, graph.a2a.sources, graph.a2a.targets, r_a2a);
}

Var AgentEncoder::forward(nn::Graph& g, const Scene& scene, const AgentGraph& graph, const Var& x_map,
                          const Caip* caip) const {
    Var x = embed(g, scene, graph);
    const Encodings r = encode_relations(g, graph);
    std::optional<PrunedEdges> pruned;
    if (caip) pruned = caip->prune(g, graph.pl2a, g.tape.constant(rel_matrix(graph.pl2a)), static_cast<int>(graph.num_nodes()));
    for (int i = 0; i < rounds_; ++i) {
        x = temporal_attention(g, x, graph, r.t2t);
        x = agent_map_attention(g, x_map, x, graph, r.pl2a, pruned ? &*pruned : nullptr);
        x = agent_agent_attention(g, x, graph, r.a2a);
    }
    return x;
}

}  // namespace lanet
