#pragma once

#include "lanet/agent_encoder.hpp"
#include "lanet/caip.hpp"
#include "lanet/map_encoder.hpp"
#include "lanet/model_config.hpp"
#include "lanet/nn/layers.hpp"

#include <optional>
#include <vector>

namespace lanet {

/// Differentiable decoder outputs. Rows are (target, mode) pairs, target-major;
/// columns are future steps. Positions and headings are in each target's
/// reference frame (its last observed pose).
struct ForecastVars {
    nn::Var loc_x, loc_y;
    nn::Var scale_x, scale_y;
    nn::Var heading;
    nn::Var heading_conf;
    nn::Var heading_scale;  // Laplace scale of the heading error, -log(conf) + floor
    nn::Var log_probs;      // targets x K
    nn::Var modes;          // mode embeddings, (targets * K) x width
};

/// Query-side geometry of the decoder for one scene.
struct DecoderGraph {
    int num_modes = 0;
    std::vector<int> targets;      // agent index per target
    std::vector<Pose2> origins;    // last observed pose per target
    std::vector<int> origin_step;
    std::vector<int> origin_node;
    EdgeList temporal;             // agent node -> target
    EdgeList map_candidates;       // polygon -> target
    EdgeList agents;               // agent node -> target, at the target's last observed step

    int num_targets() const { return static_cast<int>(targets.size()); }
    int num_queries() const { return num_targets() * num_modes; }
};

DecoderGraph build_decoder_graph(const Scene& scene, const AgentGraph& agents, const MapGraph& map,
                                 const ModelConfig& cfg);

/// Replicates target-level edges to every mode query: returns sources,
/// targets (target * K + k) and the originating edge per expanded edge.
struct ExpandedEdges {
    std::vector<int> sources, targets, base;
};
ExpandedEdges expand_to_modes(const EdgeList& edges, int num_modes);

class Decoder {
public:
    Decoder() = default;
    Decoder(nn::ParamStore& ps, const ModelConfig& cfg);

    struct Context {
        const DecoderGraph* graph = nullptr;
        nn::Var x_agent;
        nn::Var x_map;
        nn::Var r_time, r_map, r_agent;  // per target-level edge
        PrunedEdges pruned;              // CAIP result over graph->map_candidates
    };

    /// Relative encodings and CAIP pruning shared by both decoder stages.
    Context prepare(nn::Graph& g, const DecoderGraph& graph, const nn::Var& x_agent, const nn::Var& x_map,
                    const Caip& caip, std::optional<double> theta_override = std::nullopt) const;

    ForecastVars propose(nn::Graph& g, const Context& ctx) const;
    ForecastVars refine(nn::Graph& g, const Context& ctx, const ForecastVars& proposal, int steps) const;
    ForecastVars refine(nn::Graph& g, const Context& ctx, const ForecastVars& proposal) const {
        return refine(g, ctx, proposal, refine_steps_);
    }

    struct Block {
        nn::EdgeAttention temporal, map, agents, modes;
    };

private:
    nn::Var run_block(nn::Graph& g, const Block& block, const nn::Var& m, const Context& ctx) const;
    struct Heads {
        nn::Mlp loc, scale, heading, conf;
    };
    ForecastVars decode(nn::Graph& g, const Heads& heads, const nn::Var& m, int num_targets) const;

    int width_ = 0;
    int modes_ = 0;
    int horizon_ = 0;
    int refine_steps_ = 0;
    double scale_floor_ = 1e-3;
    nn::Embedding mode_emb_;
    nn::Mlp rel_time_, rel_map_, rel_agent_;
    Block propose_block_, refine_block_;
    Heads propose_heads_, refine_heads_;
    nn::Mlp traj_embed_;
    nn::Mlp cls_head_;
};

}  // namespace lanet
