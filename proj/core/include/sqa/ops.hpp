#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sqa/tensor.hpp"

namespace sqa {

/// Standard matrix product [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// Same data, new shape; element count must match.
Tensor reshape(const Tensor& a, Shape shape);

/// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Adds a rank-1 vector [n] to every row of [m x n].
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor scale(const Tensor& a, double s);

/// Row-block concatenation; all parts must share the column count.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);

/// Half-open row/column slices of a rank-2 tensor.
Tensor slice_rows(const Tensor& a, std::int64_t lo, std::int64_t hi);
Tensor slice_cols(const Tensor& a, std::int64_t lo, std::int64_t hi);
Tensor row(const Tensor& a, std::int64_t i);

/// Selects rows table[idx[0]], table[idx[1]], ... The backward pass
/// scatter-adds into the table (this is the embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> idx);

/// Numerically stabilized softmax along `axis` of a rank-1 or rank-2 tensor.
/// Non-finite input raises NumericError.
Tensor softmax(const Tensor& a, int axis = -1);

/// Mean negative log softmax probability of the target class per row.
/// logits: [n x V], targets: n indices < V.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets);

/// Per-row layer normalization with learnable gain/bias (rank-1, size n).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

/// Smooth GELU (tanh approximation).
Tensor gelu(const Tensor& a);
Tensor tanh_act(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

/// Sum of squared differences (scalar).
Tensor squared_error(const Tensor& x, const Tensor& y);

/// Sum of absolute differences (scalar).
Tensor l1_loss(const Tensor& x, const Tensor& y);

/// Dot product of two rank-1 tensors (scalar).
Tensor dot(const Tensor& u, const Tensor& v);

/// Elementwise map with caller-provided derivative. Mostly a hook for tests
/// that need an op with a deliberately wrong gradient.
Tensor custom_elementwise(const Tensor& x, std::function<double(double)> f,
                          std::function<double(double)> df);

}  // namespace sqa
