#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Var is a cheap handle
// (tape pointer + node id). Calling backward() on a 1x1 Var walks the tape in
// reverse creation order and accumulates gradients into inputs and into the
// ParamStore entries that were bound with Tape::param().

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace lanet::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
    Matrix value;
    Matrix grad;
};

/// Named parameter tensors with matching gradient slots. Iteration order is
/// the lexicographic order of names, which makes every traversal deterministic.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

    enum class Init { Uniform, Zeros, Ones };

    /// Creates `name` with shape rows x cols. Uniform init draws from
    /// +-1/sqrt(fan_in) with fan_in = rows; the stream depends only on (seed, name).
    Parameter& create(const std::string& name, int rows, int cols, Init init = Init::Uniform);

    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad();
    std::size_t size() const { return params_.size(); }
    std::size_t num_scalars() const;
    std::uint64_t seed() const { return seed_; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::uint64_t seed_;
    std::map<std::string, Parameter> params_;
};

class Tape;

class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Matrix& value() const;
    /// Gradient after backward(); an all-zero matrix if nothing reached this node.
    Matrix grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }

    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    bool defined() const { return tape_ != nullptr; }
    bool needs_grad() const;

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
public:
    using Backward = std::function<void(Tape&, int self)>;

    /// With record_grad = false no backward closures are kept (inference mode).
    explicit Tape(bool record_grad = true) : record_(record_grad) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var constant_scalar(double v);
    /// A leaf whose gradient can be read after backward().
    Var input(Matrix value);
    /// Binds a parameter; repeated calls return the same leaf.
    Var param(Parameter& p);
    Var param(ParamStore& store, const std::string& name) { return param(store.at(name)); }

    void backward(const Var& scalar_output);

    bool recording() const { return record_; }

    // Used by op implementations.
    Var push(Matrix value, bool needs_grad, Backward fn);
    const Matrix& value(int id) const { return nodes_[id].value; }
    const Matrix& grad_ref(int id) const { return nodes_[id].grad; }
    bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    /// grad[id] += g (allocating on first use). No-op for nodes that do not need grad.
    template <typename Expr>
    void accumulate(int id, const Expr& g) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) n.grad = g;
        else n.grad += g;
    }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        Backward backward;
        Parameter* param = nullptr;
    };
    bool record_;
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> param_ids_;
};

}  // namespace lanet::nn
