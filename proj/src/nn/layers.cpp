#include "lanet/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace lanet::nn {

Linear::Linear(ParamStore& ps, std::string name, int in, int out, bool bias)
    : name_(std::move(name)), in_(in), out_(out), bias_(bias) {
    ps.create(name_ + ".w", in, out);
    if (bias_) ps.create(name_ + ".b", 1, out, ParamStore::Init::Zeros);
}

Var Linear::operator()(Graph& g, const Var& x) const {
    if (x.cols() != in_)
        throw std::invalid_argument(name_ + ": expected width " + std::to_string(in_) + ", got " + std::to_string(x.cols()));
    Var y = matmul(x, g.param(name_ + ".w"));
    return bias_ ? add(y, g.param(name_ + ".b")) : y;
}

Mlp::Mlp(ParamStore& ps, const std::string& name, std::vector<int> widths, bool activate_last)
    : widths_(std::move(widths)), activate_last_(activate_last) {
    if (widths_.size() < 2) throw std::invalid_argument(name + ": an MLP needs at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i)
        layers_.emplace_back(ps, name + "." + std::to_string(i), widths_[i], widths_[i + 1]);
}

Var Mlp::operator()(Graph& g, const Var& x) const {
    Var h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i](g, h);
        if (i + 1 < layers_.size() || activate_last_) h = relu(h);
    }
    return h;
}

LayerNorm::LayerNorm(ParamStore& ps, std::string name, int dim) : name_(std::move(name)) {
    ps.create(name_ + ".gamma", 1, dim, ParamStore::Init::Ones);
    ps.create(name_ + ".beta", 1, dim, ParamStore::Init::Zeros);
}

Var LayerNorm::operator()(Graph& g, const Var& x) const {
    return layer_norm(x, g.param(name_ + ".gamma"), g.param(name_ + ".beta"));
}

Embedding::Embedding(ParamStore& ps, std::string name, int count, int dim)
    : name_(std::move(name)), count_(count), dim_(dim) {
    ps.create(name_ + ".table", count, dim);
}

Var Embedding::operator()(Graph& g, std::span<const int> index) const {
    for (int i : index)
        if (i < 0 || i >= count_)
            throw std::invalid_argument(name_ + ": index " + std::to_string(i) + " outside table of size " +
                                        std::to_string(count_));
    return gather_rows(g.param(name_ + ".table"), index);
}

EdgeAttention::EdgeAttention(ParamStore& ps, std::string name, int dim, int heads, int rel_dim, bool cross, int ffn_mult)
    : name_(std::move(name)), dim_(dim), heads_(heads), rel_dim_(rel_dim), cross_(cross) {
    if (heads < 1 || dim % heads != 0)
        throw std::invalid_argument(name_ + ": width " + std::to_string(dim) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    norm_q_ = LayerNorm(ps, name_ + ".norm_q", dim);
    if (cross_) norm_kv_ = LayerNorm(ps, name_ + ".norm_kv", dim);
    norm_ff_ = LayerNorm(ps, name_ + ".norm_ff", dim);
    wq_ = Linear(ps, name_ + ".q", dim, dim);
    wk_ = Linear(ps, name_ + ".k", dim, dim);
    wv_ = Linear(ps, name_ + ".v", dim, dim);
    wo_ = Linear(ps, name_ + ".o", dim, dim, false);
    if (rel_dim_ > 0) {
        wkr_ = Linear(ps, name_ + ".k_rel", rel_dim, dim, false);
        wvr_ = Linear(ps, name_ + ".v_rel", rel_dim, dim, false);
    }
    ffn_ = Mlp(ps, name_ + ".ffn", {dim, ffn_mult * dim, dim});
}

Var EdgeAttention::operator()(Graph& g, const Var& x_q, const Var& x_kv, std::span<const int> sources,
                              std::span<const int> targets, const std::optional<Var>& rel,
                              const std::optional<Var>& value_scale, AttentionTrace* trace) const {
    if (sources.size() != targets.size()) throw std::invalid_argument(name_ + ": sources/targets length mismatch");
    const auto num_edges = static_cast<Eigen::Index>(sources.size());
    if (rel && rel->rows() != num_edges)
        throw std::invalid_argument(name_ + ": relative encodings not aligned with edges");
    if (value_scale && value_scale->rows() != num_edges)
        throw std::invalid_argument(name_ + ": value scale not aligned with edges");
    if (rel && rel_dim_ == 0) throw std::invalid_argument(name_ + ": layer built without relative encodings");
    if (!rel && rel_dim_ > 0 && num_edges > 0) throw std::invalid_argument(name_ + ": relative encodings required");

    const int n_q = static_cast<int>(x_q.rows());
    Var h = x_q;
    if (num_edges > 0) {
        Var qn = norm_q_(g, x_q);
        Var kvn = cross_ ? norm_kv_(g, x_kv) : (x_kv.id() == x_q.id() ? qn : norm_q_(g, x_kv));
        Var q = gather_rows(wq_(g, qn), targets);
        Var k = gather_rows(wk_(g, kvn), sources);
        Var v = gather_rows(wv_(g, kvn), sources);
        if (rel) {
            k = add(k, wkr_(g, *rel));
            v = add(v, wvr_(g, *rel));
        }
        if (value_scale) v = mul(v, *value_scale);
        const double inv = 1.0 / std::sqrt(static_cast<double>(dim_ / heads_));
        Var att = segment_softmax(scale(headwise_dot(q, k, heads_), inv), targets, n_q);
        if (trace) trace->weights = att.value();
        Var agg = scatter_add_rows(headwise_scale(v, att, heads_), targets, n_q);
        h = add(x_q, wo_(g, agg));
    } else if (trace) {
        trace->weights.resize(0, heads_);
    }
    return add(h, ffn_(g, norm_ff_(g, h)));
}

}  // namespace lanet::nn
