#pragma once

#include "lanet/nn/tape.hpp"

#include <initializer_list>
#include <span>
#include <vector>

namespace lanet::nn {

// Elementwise binary ops broadcast along any dimension of size 1
// (n x d with 1 x d, n x 1, or 1 x 1, in either argument position).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var matmul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var atan2(const Var& y, const Var& x);
/// Value wrapped into (-pi, pi]; gradient passes through unchanged.
Var wrap_angle(const Var& a);
/// Same value, no gradient.
Var detach(const Var& a);

Var sum(const Var& a);        // 1 x 1
Var mean(const Var& a);       // 1 x 1
Var row_sum(const Var& a);    // n x 1
Var cumsum_cols(const Var& a);
Var logsumexp_rows(const Var& a);  // n x 1
Var log_softmax_rows(const Var& a);
Var softmax_rows(const Var& a);

Var gather_rows(const Var& a, std::span<const int> index);
/// out[index[i]] += a[i]; out has `num_rows` rows.
Var scatter_add_rows(const Var& a, std::span<const int> index, int num_rows);
Var concat_cols(std::initializer_list<Var> parts);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, int start, int len);
Var slice_rows(const Var& a, int start, int len);
/// Same elements in row-major order with a new shape.
Var reshape(const Var& a, int rows, int cols);

/// Row-wise layer normalisation with affine gamma/beta (1 x d each).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Softmax over the rows that share a segment id, independently per column.
Var segment_softmax(const Var& scores, std::span<const int> segment, int num_segments);

/// For E x d inputs split into `heads` contiguous blocks, out(e, h) = <q_e^h, k_e^h>.
Var headwise_dot(const Var& q, const Var& k, int heads);
/// out(e, j) = v(e, j) * w(e, head_of(j)) for v E x d and w E x heads.
Var headwise_scale(const Var& v, const Var& w, int heads);

}  // namespace lanet::nn
