#include "lanet/nn/ops.hpp"

#include "lanet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lanet::nn {

namespace {

using Index = Eigen::Index;

Tape& tape_of(const Var& a) {
    if (!a.defined()) throw std::invalid_argument("nn op: undefined variable");
    return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    if (b.tape() != &t) throw std::invalid_argument("nn op: variables live on different tapes");
    return t;
}

void broadcast_shape(const Var& a, const Var& b, Index& r, Index& c, const char* op) {
    auto dim = [&](Index x, Index y) {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        throw std::invalid_argument(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    };
    r = dim(a.rows(), b.rows());
    c = dim(a.cols(), b.cols());
}

Matrix expand(const Matrix& m, Index r, Index c) {
    if (m.rows() == r && m.cols() == c) return m;
    return m.replicate(r / m.rows(), c / m.cols());
}

Matrix reduce_to(const Matrix& g, Index r, Index c) {
    Matrix out = g;
    if (r == 1 && out.rows() > 1) {
        Matrix t = out.colwise().sum();
        out = std::move(t);
    }
    if (c == 1 && out.cols() > 1) {
        Matrix t = out.rowwise().sum();
        out = std::move(t);
    }
    return out;
}

template <typename F>
Var unary(const Var& a, Matrix value, F&& fn) {
    Tape& t = tape_of(a);
    return t.push(std::move(value), a.needs_grad(), std::forward<F>(fn));
}

}  // namespace

Var add(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    Index r, c;
    broadcast_shape(a, b, r, c, "add");
    Matrix v = expand(a.value(), r, c) + expand(b.value(), r, c);
    const int ia = a.id(), ib = b.id();
    const Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    return t.push(std::move(v), a.needs_grad() || b.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, reduce_to(g, ar, ac));
        if (tp.needs_grad(ib)) tp.accumulate(ib, reduce_to(g, br, bc));
    });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    Index r, c;
    broadcast_shape(a, b, r, c, "sub");
    Matrix v = expand(a.value(), r, c) - expand(b.value(), r, c);
    const int ia = a.id(), ib = b.id();
    const Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    return t.push(std::move(v), a.needs_grad() || b.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, reduce_to(g, ar, ac));
        if (tp.needs_grad(ib)) tp.accumulate(ib, -reduce_to(g, br, bc));
    });
}

Var mul(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    Index r, c;
    broadcast_shape(a, b, r, c, "mul");
    Matrix v = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
    const int ia = a.id(), ib = b.id();
    const Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    return t.push(std::move(v), a.needs_grad() || b.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, reduce_to(g.cwiseProduct(expand(tp.value(ib), r, c)), ar, ac));
        if (tp.needs_grad(ib)) tp.accumulate(ib, reduce_to(g.cwiseProduct(expand(tp.value(ia), r, c)), br, bc));
    });
}

Var div(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    Index r, c;
    broadcast_shape(a, b, r, c, "div");
    Matrix v = expand(a.value(), r, c).cwiseQuotient(expand(b.value(), r, c));
    const int ia = a.id(), ib = b.id();
    const Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    return t.push(std::move(v), a.needs_grad() || b.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        const Matrix bv = expand(tp.value(ib), r, c);
        if (tp.needs_grad(ia)) tp.accumulate(ia, reduce_to(g.cwiseQuotient(bv), ar, ac));
        if (tp.needs_grad(ib)) {
            const Matrix q = tp.value(self).cwiseQuotient(bv);
            tp.accumulate(ib, reduce_to(-g.cwiseProduct(q), br, bc));
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    Matrix v = a.value() * b.value();
    const int ia = a.id(), ib = b.id();
    return t.push(std::move(v), a.needs_grad() || b.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
        if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
    });
}

Var scale(const Var& a, double c) {
    const int ia = a.id();
    return unary(a, a.value() * c, [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_ref(self) * c); });
}

Var add_scalar(const Var& a, double c) {
    const int ia = a.id();
    return unary(a, a.value().array() + c, [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_ref(self)); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
    const int ia = a.id();
    return unary(a, a.value().cwiseMax(0.0), [=](Tape& tp, int self) {
        tp.accumulate(ia, (tp.value(ia).array() > 0.0).select(tp.grad_ref(self), 0.0).matrix());
    });
}

Var sigmoid(const Var& a) {
    const int ia = a.id();
    Matrix v = a.value().unaryExpr([](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        const Matrix& s = tp.value(self);
        tp.accumulate(ia, tp.grad_ref(self).cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
    });
}

Var softplus(const Var& a) {
    const int ia = a.id();
    Matrix v = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        Matrix s = tp.value(ia).unaryExpr([](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
        tp.accumulate(ia, tp.grad_ref(self).cwiseProduct(s));
    });
}

Var exp(const Var& a) {
    const int ia = a.id();
    return unary(a, a.value().array().exp().matrix(), [=](Tape& tp, int self) {
        tp.accumulate(ia, tp.grad_ref(self).cwiseProduct(tp.value(self)));
    });
}

Var log(const Var& a) {
    const int ia = a.id();
    return unary(a, a.value().array().log().matrix(), [=](Tape& tp, int self) {
        tp.accumulate(ia, tp.grad_ref(self).cwiseQuotient(tp.value(ia)));
    });
}

Var abs(const Var& a) {
    const int ia = a.id();
    return unary(a, a.value().cwiseAbs(), [=](Tape& tp, int self) {
        tp.accumulate(ia, tp.grad_ref(self).cwiseProduct(tp.value(ia).unaryExpr([](double x) {
            return static_cast<double>((x > 0.0) - (x < 0.0));
        })));
    });
}

Var square(const Var& a) {
    const int ia = a.id();
    return unary(a, a.value().cwiseAbs2(), [=](Tape& tp, int self) {
        tp.accumulate(ia, 2.0 * tp.grad_ref(self).cwiseProduct(tp.value(ia)));
    });
}

Var atan2(const Var& y, const Var& x) {
    Tape& t = tape_of(y, x);
    if (y.rows() != x.rows() || y.cols() != x.cols()) throw std::invalid_argument("atan2: shape mismatch");
    Matrix v = y.value().binaryExpr(x.value(), [](double a, double b) { return std::atan2(a, b); });
    const int iy = y.id(), ix = x.id();
    return t.push(std::move(v), y.needs_grad() || x.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        const Matrix& yv = tp.value(iy);
        const Matrix& xv = tp.value(ix);
        Matrix r2 = (xv.cwiseAbs2() + yv.cwiseAbs2()).cwiseMax(std::numeric_limits<double>::min());
        if (tp.needs_grad(iy)) tp.accumulate(iy, g.cwiseProduct(xv.cwiseQuotient(r2)));
        if (tp.needs_grad(ix)) tp.accumulate(ix, -g.cwiseProduct(yv.cwiseQuotient(r2)));
    });
}

Var wrap_angle(const Var& a) {
    const int ia = a.id();
    // non-finite entries pass through so training reports divergence
    Matrix v = a.value().unaryExpr([](double x) { return std::isfinite(x) ? lanet::wrap_angle(x) : x; });
    return unary(a, std::move(v), [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_ref(self)); });
}

Var detach(const Var& a) { return tape_of(a).constant(a.value()); }

Var sum(const Var& a) {
    const int ia = a.id();
    const Index r = a.rows(), c = a.cols();
    Matrix v(1, 1);
    v(0, 0) = a.value().sum();
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        tp.accumulate(ia, Matrix::Constant(r, c, tp.grad_ref(self)(0, 0)));
    });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw std::invalid_argument("mean: empty input");
    return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
    const int ia = a.id();
    const Index c = a.cols();
    Matrix v = a.value().rowwise().sum();
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        tp.accumulate(ia, tp.grad_ref(self).replicate(1, c));
    });
}

Var cumsum_cols(const Var& a) {
    const int ia = a.id();
    Matrix v = a.value();
    for (Index j = 1; j < v.cols(); ++j) v.col(j) += v.col(j - 1);
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        Matrix g = tp.grad_ref(self);
        for (Index j = g.cols() - 2; j >= 0; --j) g.col(j) += g.col(j + 1);
        tp.accumulate(ia, g);
    });
}

Var logsumexp_rows(const Var& a) {
    const int ia = a.id();
    const Matrix& x = a.value();
    Matrix v(x.rows(), 1);
    for (Index i = 0; i < x.rows(); ++i) {
        const double m = x.row(i).maxCoeff();
        v(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
    }
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        const Matrix& xv = tp.value(ia);
        const Matrix& lse = tp.value(self);
        Matrix soft = (xv.colwise() - lse.col(0)).array().exp().matrix();
        tp.accumulate(ia, (soft.array().colwise() * tp.grad_ref(self).col(0).array()).matrix());
    });
}

Var log_softmax_rows(const Var& a) {
    const int ia = a.id();
    const Matrix& x = a.value();
    Matrix v(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double m = x.row(i).maxCoeff();
        const double lse = m + std::log((x.row(i).array() - m).exp().sum());
        v.row(i) = x.row(i).array() - lse;
    }
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        Matrix soft = tp.value(self).array().exp().matrix();
        Matrix gs = g.rowwise().sum();
        tp.accumulate(ia, g - Matrix(soft.array().colwise() * gs.col(0).array()));
    });
}

Var softmax_rows(const Var& a) {
    const int ia = a.id();
    const Matrix& x = a.value();
    Matrix v(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double m = x.row(i).maxCoeff();
        v.row(i) = (x.row(i).array() - m).exp();
        v.row(i) /= v.row(i).sum();
    }
    return unary(a, std::move(v), [=](Tape& tp, int self) {
        const Matrix& s = tp.value(self);
        const Matrix& g = tp.grad_ref(self);
        Matrix dot = g.cwiseProduct(s).rowwise().sum();
        tp.accumulate(ia, s.cwiseProduct(Matrix(g.colwise() - dot.col(0))));
    });
}

Var gather_rows(const Var& a, std::span<const int> index) {
    const int ia = a.id();
    const Matrix& x = a.value();
    Matrix v(static_cast<Index>(index.size()), x.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= x.rows())
            throw std::invalid_argument("gather_rows: index " + std::to_string(index[i]) + " out of range");
        v.row(static_cast<Index>(i)) = x.row(index[i]);
    }
    std::vector<int> idx(index.begin(), index.end());
    const Index r = x.rows();
    return unary(a, std::move(v), [=, idx = std::move(idx)](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        Matrix out = Matrix::Zero(r, g.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) out.row(idx[i]) += g.row(static_cast<Index>(i));
        tp.accumulate(ia, out);
    });
}

Var scatter_add_rows(const Var& a, std::span<const int> index, int num_rows) {
    const int ia = a.id();
    const Matrix& x = a.value();
    if (static_cast<Index>(index.size()) != x.rows()) throw std::invalid_argument("scatter_add_rows: index length mismatch");
    Matrix v = Matrix::Zero(num_rows, x.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= num_rows)
            throw std::invalid_argument("scatter_add_rows: index " + std::to_string(index[i]) + " out of range");
        v.row(index[i]) += x.row(static_cast<Index>(i));
    }
    std::vector<int> idx(index.begin(), index.end());
    return unary(a, std::move(v), [=, idx = std::move(idx)](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        Matrix out(static_cast<Index>(idx.size()), g.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = g.row(idx[i]);
        tp.accumulate(ia, out);
    });
}

Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    Tape& t = tape_of(parts[0]);
    const Index r = parts[0].rows();
    Index c = 0;
    bool ng = false;
    for (const Var& p : parts) {
        if (p.tape() != &t) throw std::invalid_argument("concat_cols: variables live on different tapes");
        if (p.rows() != r) throw std::invalid_argument("concat_cols: row counts differ");
        c += p.cols();
        ng = ng || p.needs_grad();
    }
    Matrix v(r, c);
    std::vector<std::pair<int, Index>> ids;
    Index off = 0;
    for (const Var& p : parts) {
        v.middleCols(off, p.cols()) = p.value();
        ids.emplace_back(p.id(), p.cols());
        off += p.cols();
    }
    return t.push(std::move(v), ng, [ids = std::move(ids)](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        Index o = 0;
        for (auto [id, w] : ids) {
            if (tp.needs_grad(id)) tp.accumulate(id, g.middleCols(o, w));
            o += w;
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Tape& t = tape_of(parts[0]);
    const Index c = parts[0].cols();
    Index r = 0;
    bool ng = false;
    for (const Var& p : parts) {
        if (p.tape() != &t) throw std::invalid_argument("concat_rows: variables live on different tapes");
        if (p.cols() != c) throw std::invalid_argument("concat_rows: column counts differ");
        r += p.rows();
        ng = ng || p.needs_grad();
    }
    Matrix v(r, c);
    std::vector<std::pair<int, Index>> ids;
    Index off = 0;
    for (const Var& p : parts) {
        v.middleRows(off, p.rows()) = p.value();
        ids.emplace_back(p.id(), p.rows());
        off += p.rows();
    }
    return t.push(std::move(v), ng, [ids = std::move(ids)](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        Index o = 0;
        for (auto [id, h] : ids) {
            if (tp.needs_grad(id)) tp.accumulate(id, g.middleRows(o, h));
            o += h;
        }
    });
}

Var slice_cols(const Var& a, int start, int len) {
    if (start < 0 || len < 0 || start + len > a.cols()) throw std::invalid_argument("slice_cols: range out of bounds");
    const int ia = a.id();
    const Index r = a.rows(), c = a.cols();
    return unary(a, a.value().middleCols(start, len), [=](Tape& tp, int self) {
        Matrix g = Matrix::Zero(r, c);
        g.middleCols(start, len) = tp.grad_ref(self);
        tp.accumulate(ia, g);
    });
}

Var slice_rows(const Var& a, int start, int len) {
    if (start < 0 || len < 0 || start + len > a.rows()) throw std::invalid_argument("slice_rows: range out of bounds");
    const int ia = a.id();
    const Index r = a.rows(), c = a.cols();
    return unary(a, a.value().middleRows(start, len), [=](Tape& tp, int self) {
        Matrix g = Matrix::Zero(r, c);
        g.middleRows(start, len) = tp.grad_ref(self);
        tp.accumulate(ia, g);
    });
}

Var reshape(const Var& a, int rows, int cols) {
    if (static_cast<Index>(rows) * cols != a.value().size()) throw std::invalid_argument("reshape: element count mismatch");
    const int ia = a.id();
    const Index r = a.rows(), c = a.cols();
    Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
    return unary(a, std::move(out), [=](Tape& tp, int self) {
        tp.accumulate(ia, Eigen::Map<const Matrix>(tp.grad_ref(self).data(), r, c));
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    Tape& t = tape_of(x, gamma);
    tape_of(x, beta);
    const Index n = x.rows(), d = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
        throw std::invalid_argument("layer_norm: gamma/beta must be 1 x d");
    const Matrix& xv = x.value();
    Matrix xhat(n, d);
    Eigen::VectorXd rstd(n);
    for (Index i = 0; i < n; ++i) {
        const double mu = xv.row(i).mean();
        const double var = (xv.row(i).array() - mu).square().mean();
        rstd(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mu) * rstd(i);
    }
    Matrix v = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    const int ix = x.id(), ig = gamma.id(), ib = beta.id();
    const bool ng = x.needs_grad() || gamma.needs_grad() || beta.needs_grad();
    return t.push(std::move(v), ng, [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(ig)) tp.accumulate(ig, Matrix(g.cwiseProduct(xhat).colwise().sum()));
        if (tp.needs_grad(ib)) tp.accumulate(ib, Matrix(g.colwise().sum()));
        if (tp.needs_grad(ix)) {
            Matrix dxhat = g.array().rowwise() * tp.value(ig).row(0).array();
            Matrix dx(n, d);
            for (Index i = 0; i < n; ++i) {
                const double m1 = dxhat.row(i).mean();
                const double m2 = dxhat.row(i).dot(xhat.row(i)) / static_cast<double>(d);
                dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
            }
            tp.accumulate(ix, dx);
        }
    });
}

Var segment_softmax(const Var& scores, std::span<const int> segment, int num_segments) {
    const Matrix& s = scores.value();
    const Index e = s.rows(), h = s.cols();
    if (static_cast<Index>(segment.size()) != e) throw std::invalid_argument("segment_softmax: segment length mismatch");
    Matrix mx = Matrix::Constant(num_segments, h, -std::numeric_limits<double>::infinity());
    for (Index i = 0; i < e; ++i) {
        const int g = segment[i];
        if (g < 0 || g >= num_segments) throw std::invalid_argument("segment_softmax: segment id out of range");
        mx.row(g) = mx.row(g).cwiseMax(s.row(i));
    }
    Matrix v(e, h);
    Matrix den = Matrix::Zero(num_segments, h);
    for (Index i = 0; i < e; ++i) {
        v.row(i) = (s.row(i) - mx.row(segment[i])).array().exp();
        den.row(segment[i]) += v.row(i);
    }
    for (Index i = 0; i < e; ++i) v.row(i).array() /= den.row(segment[i]).array();
    std::vector<int> seg(segment.begin(), segment.end());
    const int is = scores.id();
    return unary(scores, std::move(v), [=, seg = std::move(seg)](Tape& tp, int self) {
        const Matrix& a = tp.value(self);
        const Matrix& g = tp.grad_ref(self);
        Matrix ag = a.cwiseProduct(g);
        Matrix tot = Matrix::Zero(num_segments, h);
        for (Index i = 0; i < e; ++i) tot.row(seg[i]) += ag.row(i);
        Matrix out(e, h);
        for (Index i = 0; i < e; ++i) out.row(i) = ag.row(i) - a.row(i).cwiseProduct(tot.row(seg[i]));
        tp.accumulate(is, out);
    });
}

Var headwise_dot(const Var& q, const Var& k, int heads) {
    Tape& t = tape_of(q, k);
    const Index e = q.rows(), d = q.cols();
    if (k.rows() != e || k.cols() != d) throw std::invalid_argument("headwise_dot: shape mismatch");
    if (heads < 1 || d % heads != 0) throw std::invalid_argument("headwise_dot: width not divisible by heads");
    const Index dh = d / heads;
    Matrix v(e, heads);
    const Matrix& qv = q.value();
    const Matrix& kv = k.value();
    for (Index i = 0; i < e; ++i)
        for (int hh = 0; hh < heads; ++hh) v(i, hh) = qv.row(i).segment(hh * dh, dh).dot(kv.row(i).segment(hh * dh, dh));
    const int iq = q.id(), ik = k.id();
    return t.push(std::move(v), q.needs_grad() || k.needs_grad(), [=](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        Matrix ge(e, d);
        for (int hh = 0; hh < heads; ++hh)
            ge.middleCols(hh * dh, dh) = g.col(hh).replicate(1, dh);
        if (tp.needs_grad(iq)) tp.accumulate(iq, ge.cwiseProduct(tp.value(ik)));
        if (tp.needs_grad(ik)) tp.accumulate(ik, ge.cwiseProduct(tp.value(iq)));
    });
}

Var headwise_scale(const Var& v, const Var& w, int heads) {
    Tape& t = tape_of(v, w);
    const Index e = v.rows(), d = v.cols();
    if (w.rows() != e || w.cols() != heads) throw std::invalid_argument("headwise_scale: weight shape mismatch");
    if (heads < 1 || d % heads != 0) throw std::invalid_argument("headwise_scale: width not divisible by heads");
    const Index dh = d / heads;
    Matrix we(e, d);
    for (int hh = 0; hh < heads; ++hh) we.middleCols(hh * dh, dh) = w.value().col(hh).replicate(1, dh);
    Matrix out = v.value().cwiseProduct(we);
    const int iv = v.id(), iw = w.id();
    return t.push(std::move(out), v.needs_grad() || w.needs_grad(), [=, we = std::move(we)](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(iv)) tp.accumulate(iv, g.cwiseProduct(we));
        if (tp.needs_grad(iw)) {
            Matrix gv = g.cwiseProduct(tp.value(iv));
            Matrix gw(e, heads);
            for (int hh = 0; hh < heads; ++hh) gw.col(hh) = gv.middleCols(hh * dh, dh).rowwise().sum();
            tp.accumulate(iw, gw);
        }
    });
}

}  // namespace lanet::nn
