#pragma once

#include "lanet/caip.hpp"
#include "lanet/geometry.hpp"
#include "lanet/map_encoder.hpp"
#include "lanet/model_config.hpp"
#include "lanet/nn/layers.hpp"
#include "lanet/scene.hpp"

#include <vector>

namespace lanet {

/// Temporal edges for one track over its observed window: s -> t iff
/// 0 < t - s <= window and both steps are valid. Indices are step numbers.
EdgeList build_temporal_edges(const AgentTrack& track, int history_steps, int window);

/// One node per valid observed (agent, step), with the edge sets that connect them.
struct AgentGraph {
    int num_agents = 0;
    int history_steps = 0;
    std::vector<int> node_agent;
    std::vector<int> node_step;
    std::vector<Pose2> node_pose;
    std::vector<int> node_index;  // agent * H + step -> node, or -1
    EdgeList t2t;                 // node -> node, same agent, earlier -> later
    EdgeList pl2a;                // polygon -> node
    EdgeList a2a;                 // node -> node, same step, different agents

    int node(int agent, int step) const { return node_index[agent * history_steps + step]; }
    std::size_t num_nodes() const { return node_agent.size(); }
};

AgentGraph build_agent_graph(const Scene& scene, const MapGraph& map, const ModelConfig& cfg);

/// Agent-map edges between agent step poses and polygon anchors within `radius`.
EdgeList build_agent_map_edges(const AgentGraph& graph, const MapGraph& map, double radius);
/// Per-step agent-agent edges within `radius`, no self-edges.
EdgeList build_agent_agent_edges(const AgentGraph& graph, double radius);

class AgentEncoder {
public:
    AgentEncoder() = default;
    AgentEncoder(nn::ParamStore& ps, const ModelConfig& cfg);

    /// Embedded per-node features (x_a).
    nn::Var embed(nn::Graph& g, const Scene& scene, const AgentGraph& graph) const;

    nn::Var temporal_attention(nn::Graph& g, const nn::Var& x, const AgentGraph& graph, const nn::Var& r_t2t) const;
    nn::Var agent_map_attention(nn::Graph& g, const nn::Var& x_map, const nn::Var& x, const AgentGraph& graph,
                                const nn::Var& r_pl2a, const PrunedEdges* pruned = nullptr) const;
    nn::Var agent_agent_attention(nn::Graph& g, const nn::Var& x, const AgentGraph& graph, const nn::Var& r_a2a) const;

    struct Encodings {
        nn::Var t2t;
        nn::Var pl2a;
        nn::Var a2a;
    };
    Encodings encode_relations(nn::Graph& g, const AgentGraph& graph) const;

    /// temporal -> agent-map -> agent-agent, repeated for the configured rounds.
    /// When `caip` is given the agent-map edges are pruned and soft-weighted first.
    nn::Var forward(nn::Graph& g, const Scene& scene, const AgentGraph& graph, const nn::Var& x_map,
                    const Caip* caip = nullptr) const;

private:
    int rounds_ = 0;
    nn::Embedding type_;
    nn::Mlp in_;
    nn::Mlp rel_t2t_, rel_pl2a_, rel_a2a_;
    nn::EdgeAttention att_t2t_, att_pl2a_, att_a2a_;
};

}  // namespace lanet
