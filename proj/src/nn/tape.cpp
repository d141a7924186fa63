#include "lanet/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace lanet::nn {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// splitmix64; portable across standard libraries, unlike <random> distributions.
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

}  // namespace

Parameter& ParamStore::create(const std::string& name, int rows, int cols, Init init) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("ParamStore: empty shape for " + name);
    if (params_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    Parameter p;
    p.value.resize(rows, cols);
    p.grad = Matrix::Zero(rows, cols);
    switch (init) {
    case Init::Zeros: p.value.setZero(); break;
    case Init::Ones: p.value.setOnes(); break;
    case Init::Uniform: {
        SplitMix rng{seed_ ^ fnv1a(name)};
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = (2.0 * rng.uniform01() - 1.0) * bound;
        break;
    }
    }
    return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [_, p] : params_) p.grad.setZero();
}

std::size_t ParamStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

const Matrix& Var::value() const { return tape_->value(id_); }

Matrix Var::grad() const {
    if (tape_->has_grad(id_)) return tape_->grad_ref(id_);
    return Matrix::Zero(rows(), cols());
}

bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::push(Matrix value, bool needs_grad, Backward fn) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad && record_;
    if (n.needs_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::constant_scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

Var Tape::input(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var(this, it->second);
    Var v = push(p.value, true, nullptr);
    nodes_[v.id()].param = &p;
    param_ids_.emplace(&p, v.id());
    return v;
}

void Tape::backward(const Var& out) {
    if (out.tape() != this) throw std::invalid_argument("Tape::backward: foreign variable");
    if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("Tape::backward: output must be 1x1");
    if (!record_) throw std::logic_error("Tape::backward: tape was built without gradient recording");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[out.id()].needs_grad) return;
    nodes_[out.id()].grad = Matrix::Ones(1, 1);
    for (int id = out.id(); id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) continue;
        if (n.backward) n.backward(*this, id);
    }
    for (auto& n : nodes_)
        if (n.param && n.grad.size() != 0) n.param->grad += n.grad;
}

}  // namespace lanet::nn
