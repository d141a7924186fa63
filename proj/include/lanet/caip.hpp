#pragma once

#include "lanet/geometry.hpp"
#include "lanet/nn/layers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lanet {

/// Result of pruning one candidate edge set.
struct PrunedEdges {
    EdgeList kept;                            // candidates where valid_mask is set
    std::vector<int> kept_index;              // position of each kept edge in the candidate list
    std::vector<std::uint8_t> valid_mask;     // per candidate
    nn::Var scores;                           // kept x 1, in (0, 1)
    nn::Var weights;                          // kept x 1, sums to 1 per target node
    double theta = 0.0;                       // threshold the hard mask used
};

/// Context-aware interaction pruning for agent<->map edges: an MLP scores each
/// candidate edge, a learnable threshold hard-prunes it, and surviving edges
/// get temperature-scaled sigmoid weights normalised per query node.
class Caip {
public:
    Caip() = default;
    /// `hidden_layers` ReLU layers of width `hidden` followed by a sigmoid output.
    Caip(nn::ParamStore& ps, std::string name, int in_dim, int hidden, int hidden_layers, double theta_init,
         double tau_init, bool learn_tau, bool eq8_as_printed);

    /// s = sigmoid(MLP(features)), edges x 1.
    nn::Var score_edges(nn::Graph& g, const nn::Var& features) const;
    nn::Var theta(nn::Graph& g) const;
    nn::Var tau(nn::Graph& g) const;
    double theta_value(const nn::ParamStore& ps) const;
    double tau_value(const nn::ParamStore& ps) const;
    /// +1 keeps high scores heavy; -1 reproduces the formula with a negated deviation.
    double sign() const { return eq8_as_printed_ ? -1.0 : 1.0; }

    /// Scores the candidates, applies the hard mask against a detached theta
    /// (or `theta_override`), keeps the best edge of any query node that would
    /// otherwise lose all of its candidates, and computes soft weights.
    PrunedEdges prune(nn::Graph& g, const EdgeList& candidates, const nn::Var& features, int num_queries,
                      std::optional<double> theta_override = std::nullopt) const;

    const std::string& name() const { return name_; }

private:
    std::string name_;
    nn::Mlp scorer_;
    bool learn_tau_ = true;
    double tau_fixed_ = 0.1;
    bool eq8_as_printed_ = false;
};

/// valid[e] = scores[e] >= theta.
std::vector<std::uint8_t> hard_mask(std::span<const double> scores, double theta);

/// w_e = sigmoid(sign * (S_e - theta) / tau), normalised over edges sharing a
/// target. `scores` is edges x 1; theta and tau are 1 x 1.
nn::Var soft_weights(const nn::Var& scores, std::span<const int> targets, int num_targets, const nn::Var& theta,
                     const nn::Var& tau, double sign);

/// values (edges x d) scaled row-wise by soft_weights(...).
nn::Var soft_weight(const nn::Var& values, const nn::Var& scores, std::span<const int> targets, int num_targets,
                    const nn::Var& theta, const nn::Var& tau, double sign);

}  // namespace lanet
