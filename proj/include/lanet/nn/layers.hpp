#pragma once

#include "lanet/nn/ops.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lanet::nn {

/// A forward pass: the tape being recorded and the parameters it reads.
struct Graph {
    Tape& tape;
    ParamStore& params;

    Var param(const std::string& name) { return tape.param(params, name); }
};

class Linear {
public:
    Linear() = default;
    Linear(ParamStore& ps, std::string name, int in, int out, bool bias = true);

    Var operator()(Graph& g, const Var& x) const;
    int in() const { return in_; }
    int out() const { return out_; }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    int in_ = 0;
    int out_ = 0;
    bool bias_ = true;
};

enum class Activation { Relu, None };

/// Alternating affine + ReLU layers; the final layer is affine only unless
/// `activate_last` is set. `widths` lists every layer width including input.
class Mlp {
public:
    Mlp() = default;
    Mlp(ParamStore& ps, const std::string& name, std::vector<int> widths, bool activate_last = false);

    Var operator()(Graph& g, const Var& x) const;
    int in() const { return widths_.front(); }
    int out() const { return widths_.back(); }
    const std::vector<Linear>& layers() const { return layers_; }

private:
    std::vector<int> widths_;
    std::vector<Linear> layers_;
    bool activate_last_ = false;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamStore& ps, std::string name, int dim);
    Var operator()(Graph& g, const Var& x) const;

private:
    std::string name_;
};

class Embedding {
public:
    Embedding() = default;
    Embedding(ParamStore& ps, std::string name, int count, int dim);

    /// Rows of the table for each index; throws std::invalid_argument when out of range.
    Var operator()(Graph& g, std::span<const int> index) const;
    int count() const { return count_; }

private:
    std::string name_;
    int count_ = 0;
    int dim_ = 0;
};

struct AttentionTrace {
    Matrix weights;  // edges x heads, softmax-normalised per (target, head)
};

/// Multi-head attention restricted to an explicit edge list, with relative
/// encodings added to keys and values through learned projections.
///
/// Pre-norm residual layout:
///   h   = x_q + W_o * aggregate(softmax(q.k / sqrt(d_h)) * v)
///   out = h + FFN(LN(h))
/// where q, k, v read layer-normalised inputs. A query with no incoming edge
/// aggregates nothing, so it only goes through the feed-forward branch.
class EdgeAttention {
public:
    EdgeAttention() = default;
    /// `rel_dim` = 0 disables relative encodings. `cross` gives keys/values
    /// their own layer norm (distinct query and key node sets).
    EdgeAttention(ParamStore& ps, std::string name, int dim, int heads, int rel_dim, bool cross, int ffn_mult = 2);

    /// `sources` index rows of x_kv, `targets` rows of x_q. `rel` is edges x rel_dim.
    /// `value_scale`, when given, is an edges x 1 multiplier on each value.
    Var operator()(Graph& g, const Var& x_q, const Var& x_kv, std::span<const int> sources, std::span<const int> targets,
                   const std::optional<Var>& rel = std::nullopt, const std::optional<Var>& value_scale = std::nullopt,
                   AttentionTrace* trace = nullptr) const;

    int dim() const { return dim_; }
    int heads() const { return heads_; }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    int dim_ = 0;
    int heads_ = 1;
    int rel_dim_ = 0;
    bool cross_ = false;
    LayerNorm norm_q_, norm_kv_, norm_ff_;
    Linear wq_, wk_, wv_, wo_, wkr_, wvr_;
    Mlp ffn_;
};

}  // namespace lanet::nn
