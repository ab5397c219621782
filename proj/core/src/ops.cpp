#include "sqa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace sqa {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
               std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Tensor::wrap(std::move(n));
}

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected rank-2 tensor, got shape " +
                     shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!same_shape(a.shape(), b.shape())) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

// C[m x n] += A[m x k] * B[k x n]
void mm_nn_acc(const double* a, const double* b, double* c, std::int64_t m,
               std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
void mm_nt_acc(const double* a, const double* b, double* c, std::int64_t m,
               std::int64_t n, std::int64_t k) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* crow = c + i * k;
    for (std::int64_t j = 0; j < k; ++j) {
      const double* brow = b + j * n;
      double acc = 0.0;
      for (std::int64_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
void mm_tn_acc(const double* a, const double* b, double* c, std::int64_t m,
               std::int64_t k, std::int64_t n) {
  for (std::int64_t p = 0; p < m; ++p) {
    const double* arow = a + p * k;
    const double* brow = b + p * n;
    for (std::int64_t i = 0; i < k; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul lhs");
  require_rank2(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  mm_nn_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_op({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& A = *self.parents[0];
    Node& B = *self.parents[1];
    if (A.requires_grad) {
      A.ensure_grad();
      mm_nt_acc(self.grad.data(), B.value.data(), A.grad.data(), m, n, k);
    }
    if (B.requires_grad) {
      B.ensure_grad();
      mm_tn_acc(A.value.data(), self.grad.data(), B.grad.data(), m, k, n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::int64_t r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<std::size_t>(r * c));
  const auto& in = a.data();
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return make_op({c, r}, std::move(out), {a.node()}, [r, c](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) A.grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<double> out = a.data();
  return make_op(std::move(shape), std::move(out), {a.node()}, [](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
  });
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* what,
                          double (*fwd)(double, double), double sign_b) {
  require_same_shape(a, b, what);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [sign_b](Node& self) {
    Node& A = *self.parents[0];
    Node& B = *self.parents[1];
    if (A.requires_grad) {
      A.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        B.grad[i] += sign_b * self.grad[i];
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, "add", [](double x, double y) { return x + y; }, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(a, b, "sub", [](double x, double y) { return x - y; }, -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& A = *self.parents[0];
    Node& B = *self.parents[1];
    if (A.requires_grad) {
      A.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        A.grad[i] += self.grad[i] * B.value[i];
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        B.grad[i] += self.grad[i] * A.value[i];
    }
  });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_rank2(m, "add_rowvec lhs");
  if (v.rank() != 1 || v.numel() != m.cols()) {
    throw ShapeError("add_rowvec: vector shape " + shape_str(v.shape()) +
                     " does not match matrix " + shape_str(m.shape()));
  }
  const std::int64_t r = m.rows(), c = m.cols();
  const auto& mv = m.data();
  const auto& vv = v.data();
  std::vector<double> out(mv.size());
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] + vv[j];
  return make_op(m.shape(), std::move(out), {m.node(), v.node()}, [r, c](Node& self) {
    Node& M = *self.parents[0];
    Node& V = *self.parents[1];
    if (M.requires_grad) {
      M.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) M.grad[i] += self.grad[i];
    }
    if (V.requires_grad) {
      V.ensure_grad();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) V.grad[j] += self.grad[i * c + j];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  return make_op(a.shape(), std::move(out), {a.node()}, [s](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += s * self.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  std::int64_t cols = -1, rows_total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows part");
    if (cols < 0) cols = p.cols();
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch, " + shape_str(p.shape()));
    }
    rows_total += p.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows_total * cols));
  std::vector<NodePtr> parents;
  std::vector<std::int64_t> part_rows;
  parents.reserve(parts.size());
  part_rows.reserve(parts.size());
  for (const auto& p : parts) {
    const auto& pv = p.data();
    out.insert(out.end(), pv.begin(), pv.end());
    parents.push_back(p.node());
    part_rows.push_back(p.rows());
  }
  return make_op({rows_total, cols}, std::move(out), std::move(parents),
                 [part_rows, cols](Node& self) {
                   std::size_t offset = 0;
                   for (std::size_t k = 0; k < self.parents.size(); ++k) {
                     Node& P = *self.parents[k];
                     const std::size_t len =
                         static_cast<std::size_t>(part_rows[k] * cols);
                     if (P.requires_grad) {
                       P.ensure_grad();
                       for (std::size_t i = 0; i < len; ++i)
                         P.grad[i] += self.grad[offset + i];
                     }
                     offset += len;
                   }
                 });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols lhs");
  require_rank2(b, "concat_cols rhs");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row mismatch, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::int64_t r = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(static_cast<std::size_t>(r * (ca + cb)));
  for (std::int64_t i = 0; i < r; ++i) {
    for (std::int64_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.data()[i * ca + j];
    for (std::int64_t j = 0; j < cb; ++j)
      out[i * (ca + cb) + ca + j] = b.data()[i * cb + j];
  }
  return make_op({r, ca + cb}, std::move(out), {a.node(), b.node()},
                 [r, ca, cb](Node& self) {
                   Node& A = *self.parents[0];
                   Node& B = *self.parents[1];
                   if (A.requires_grad) {
                     A.ensure_grad();
                     for (std::int64_t i = 0; i < r; ++i)
                       for (std::int64_t j = 0; j < ca; ++j)
                         A.grad[i * ca + j] += self.grad[i * (ca + cb) + j];
                   }
                   if (B.requires_grad) {
                     B.ensure_grad();
                     for (std::int64_t i = 0; i < r; ++i)
                       for (std::int64_t j = 0; j < cb; ++j)
                         B.grad[i * cb + j] += self.grad[i * (ca + cb) + ca + j];
                   }
                 });
}

Tensor slice_rows(const Tensor& a, std::int64_t lo, std::int64_t hi) {
  require_rank2(a, "slice_rows");
  if (lo < 0 || hi > a.rows() || lo >= hi) {
    throw IndexError("slice_rows: range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + ") invalid for " + shape_str(a.shape()));
  }
  const std::int64_t c = a.cols();
  std::vector<double> out(a.data().begin() + lo * c, a.data().begin() + hi * c);
  return make_op({hi - lo, c}, std::move(out), {a.node()}, [lo, c](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    const std::size_t base = static_cast<std::size_t>(lo * c);
    for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[base + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::int64_t lo, std::int64_t hi) {
  require_rank2(a, "slice_cols");
  if (lo < 0 || hi > a.cols() || lo >= hi) {
    throw IndexError("slice_cols: range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + ") invalid for " + shape_str(a.shape()));
  }
  const std::int64_t r = a.rows(), c = a.cols(), w = hi - lo;
  std::vector<double> out(static_cast<std::size_t>(r * w));
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < w; ++j) out[i * w + j] = a.data()[i * c + lo + j];
  return make_op({r, w}, std::move(out), {a.node()}, [r, c, lo, w](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < w; ++j)
        A.grad[i * c + lo + j] += self.grad[i * w + j];
  });
}

Tensor row(const Tensor& a, std::int64_t i) { return slice_rows(a, i, i + 1); }

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> idx) {
  require_rank2(table, "gather_rows");
  const std::int64_t v = table.rows(), c = table.cols();
  for (auto i : idx) {
    if (i < 0 || i >= v) {
      throw IndexError("gather_rows: index " + std::to_string(i) +
                       " out of range for table " + shape_str(table.shape()));
    }
  }
  const std::int64_t n = static_cast<std::int64_t>(idx.size());
  std::vector<double> out(static_cast<std::size_t>(n * c));
  for (std::int64_t r = 0; r < n; ++r) {
    const double* src = table.data().data() + idx[r] * c;
    std::copy(src, src + c, out.begin() + r * c);
  }
  std::vector<std::int64_t> idx_copy(idx.begin(), idx.end());
  return make_op({n, c}, std::move(out), {table.node()},
                 [idx_copy = std::move(idx_copy), c](Node& self) {
                   Node& T = *self.parents[0];
                   if (!T.requires_grad) return;
                   T.ensure_grad();
                   for (std::size_t r = 0; r < idx_copy.size(); ++r) {
                     double* dst = T.grad.data() + idx_copy[r] * c;
                     const double* src = self.grad.data() + r * c;
                     for (std::int64_t j = 0; j < c; ++j) dst[j] += src[j];
                   }
                 });
}

namespace {

void softmax_slice(const double* x, double* y, std::int64_t n, std::int64_t stride) {
  double mx = x[0];
  for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double e = std::exp(x[i * stride] - mx);
    y[i * stride] = e;
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (std::int64_t i = 0; i < n; ++i) y[i * stride] *= inv;
}

void softmax_backward_slice(const double* y, const double* dy, double* dx,
                            std::int64_t n, std::int64_t stride) {
  double dot = 0.0;
  for (std::int64_t i = 0; i < n; ++i) dot += dy[i * stride] * y[i * stride];
  for (std::int64_t i = 0; i < n; ++i)
    dx[i * stride] += y[i * stride] * (dy[i * stride] - dot);
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  if (!all_finite(a.data())) throw NumericError("softmax: non-finite input");
  const std::int64_t rank = a.rank();
  if (rank != 1 && rank != 2) {
    throw ShapeError("softmax: rank-1 or rank-2 input required, got " +
                     shape_str(a.shape()));
  }
  int ax = axis;
  if (ax < 0) ax = static_cast<int>(rank) - 1;
  if (ax >= rank) throw IndexError("softmax: axis " + std::to_string(axis) +
                                   " invalid for shape " + shape_str(a.shape()));
  std::vector<double> out(a.data().size());
  std::int64_t slices, n, stride, slice_step;
  if (rank == 1) {
    slices = 1;
    n = a.numel();
    stride = 1;
    slice_step = 0;
  } else if (ax == 1) {
    slices = a.rows();
    n = a.cols();
    stride = 1;
    slice_step = a.cols();
  } else {
    slices = a.cols();
    n = a.rows();
    stride = a.cols();
    slice_step = 1;
  }
  for (std::int64_t s = 0; s < slices; ++s) {
    softmax_slice(a.data().data() + s * slice_step, out.data() + s * slice_step, n,
                  stride);
  }
  return make_op(a.shape(), std::move(out), {a.node()},
                 [slices, n, stride, slice_step](Node& self) {
                   Node& A = *self.parents[0];
                   if (!A.requires_grad) return;
                   A.ensure_grad();
                   for (std::int64_t s = 0; s < slices; ++s) {
                     softmax_backward_slice(self.value.data() + s * slice_step,
                                            self.grad.data() + s * slice_step,
                                            A.grad.data() + s * slice_step, n, stride);
                   }
                 });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets) {
  require_rank2(logits, "cross_entropy");
  const std::int64_t n = logits.rows(), v = logits.cols();
  if (static_cast<std::int64_t>(targets.size()) != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " rows");
  }
  for (auto t : targets) {
    if (t < 0 || t >= v) {
      throw IndexError("cross_entropy: target " + std::to_string(t) +
                       " out of range [0, " + std::to_string(v) + ")");
    }
  }
  if (!all_finite(logits.data())) throw NumericError("cross_entropy: non-finite logits");
  const auto& x = logits.data();
  double total = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    const double* xr = x.data() + r * v;
    double mx = xr[0];
    for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < v; ++j) sum += std::exp(xr[j] - mx);
    total += mx + std::log(sum) - xr[targets[r]];
  }
  std::vector<std::int64_t> tgt(targets.begin(), targets.end());
  return make_op({1}, {total / static_cast<double>(n)}, {logits.node()},
                 [tgt = std::move(tgt), n, v](Node& self) {
                   Node& L = *self.parents[0];
                   if (!L.requires_grad) return;
                   L.ensure_grad();
                   const double g = self.grad[0] / static_cast<double>(n);
                   for (std::int64_t r = 0; r < n; ++r) {
                     const double* xr = L.value.data() + r * v;
                     double* dr = L.grad.data() + r * v;
                     double mx = xr[0];
                     for (std::int64_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
                     double sum = 0.0;
                     for (std::int64_t j = 0; j < v; ++j) sum += std::exp(xr[j] - mx);
                     const double inv = 1.0 / sum;
                     for (std::int64_t j = 0; j < v; ++j) {
                       const double p = std::exp(xr[j] - mx) * inv;
                       dr[j] += g * (p - (j == tgt[r] ? 1.0 : 0.0));
                     }
                   }
                 });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps) {
  require_rank2(x, "layer_norm_rows");
  const std::int64_t r = x.rows(), c = x.cols();
  if (gain.rank() != 1 || gain.numel() != c || bias.rank() != 1 || bias.numel() != c) {
    throw ShapeError("layer_norm_rows: gain/bias must be rank-1 of size " +
                     std::to_string(c));
  }
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::int64_t i = 0; i < r; ++i) {
    const double* xi = xv.data() + i * c;
    double mean = 0.0;
    for (std::int64_t j = 0; j < c; ++j) mean += xi[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::int64_t j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(c);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::int64_t j = 0; j < c; ++j) {
      out[i * c + j] = (xi[j] - mean) * inv_std * gain.data()[j] + bias.data()[j];
    }
  }
  return make_op(x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
                 [r, c, eps](Node& self) {
                   Node& X = *self.parents[0];
                   Node& G = *self.parents[1];
                   Node& B = *self.parents[2];
                   const double nc = static_cast<double>(c);
                   for (std::int64_t i = 0; i < r; ++i) {
                     const double* xi = X.value.data() + i * c;
                     const double* dyi = self.grad.data() + i * c;
                     double mean = 0.0;
                     for (std::int64_t j = 0; j < c; ++j) mean += xi[j];
                     mean /= nc;
                     double var = 0.0;
                     for (std::int64_t j = 0; j < c; ++j)
                       var += (xi[j] - mean) * (xi[j] - mean);
                     var /= nc;
                     const double inv_std = 1.0 / std::sqrt(var + eps);
                     if (G.requires_grad || B.requires_grad) {
                       if (G.requires_grad) G.ensure_grad();
                       if (B.requires_grad) B.ensure_grad();
                       for (std::int64_t j = 0; j < c; ++j) {
                         const double xhat = (xi[j] - mean) * inv_std;
                         if (G.requires_grad) G.grad[j] += dyi[j] * xhat;
                         if (B.requires_grad) B.grad[j] += dyi[j];
                       }
                     }
                     if (X.requires_grad) {
                       X.ensure_grad();
                       double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                       for (std::int64_t j = 0; j < c; ++j) {
                         const double xhat = (xi[j] - mean) * inv_std;
                         const double dxhat = dyi[j] * G.value[j];
                         sum_dxhat += dxhat;
                         sum_dxhat_xhat += dxhat * xhat;
                       }
                       double* dxi = X.grad.data() + i * c;
                       for (std::int64_t j = 0; j < c; ++j) {
                         const double xhat = (xi[j] - mean) * inv_std;
                         const double dxhat = dyi[j] * G.value[j];
                         dxi[j] += inv_std * (dxhat - sum_dxhat / nc -
                                              xhat * sum_dxhat_xhat / nc);
                       }
                     }
                   }
                 });
}

namespace {

Tensor elementwise_unary(const Tensor& x, double (*f)(double), double (*df)(double),
                         const char* /*what*/) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_op(x.shape(), std::move(out), {x.node()}, [df](Node& self) {
    Node& X = *self.parents[0];
    if (!X.requires_grad) return;
    X.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      X.grad[i] += df(X.value[i]) * self.grad[i];
  });
}

double gelu_fwd(double x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  const double u = kC * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_df(double x) {
  constexpr double kC = 0.7978845608028654;
  const double u = kC * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = kC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

double sigmoid_fwd(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double sigmoid_df(double x) {
  const double s = sigmoid_fwd(x);
  return s * (1.0 - s);
}

double tanh_fwd(double x) { return std::tanh(x); }
double tanh_df(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

}  // namespace

Tensor gelu(const Tensor& a) { return elementwise_unary(a, gelu_fwd, gelu_df, "gelu"); }
Tensor tanh_act(const Tensor& a) {
  return elementwise_unary(a, tanh_fwd, tanh_df, "tanh");
}
Tensor sigmoid(const Tensor& a) {
  return elementwise_unary(a, sigmoid_fwd, sigmoid_df, "sigmoid");
}

Tensor sum_all(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_op({1}, {total}, {a.node()}, [](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (auto& g : A.grad) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_op({1}, {total / n}, {a.node()}, [n](Node& self) {
    Node& A = *self.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (auto& g : A.grad) g += self.grad[0] / n;
  });
}

Tensor squared_error(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "squared_error");
  double total = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const double d = x.data()[i] - y.data()[i];
    total += d * d;
  }
  return make_op({1}, {total}, {x.node(), y.node()}, [](Node& self) {
    Node& X = *self.parents[0];
    Node& Y = *self.parents[1];
    const double g = self.grad[0];
    if (X.requires_grad) X.ensure_grad();
    if (Y.requires_grad) Y.ensure_grad();
    for (std::size_t i = 0; i < X.value.size(); ++i) {
      const double d = 2.0 * (X.value[i] - Y.value[i]) * g;
      if (X.requires_grad) X.grad[i] += d;
      if (Y.requires_grad) Y.grad[i] -= d;
    }
  });
}

Tensor l1_loss(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "l1_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    total += std::abs(x.data()[i] - y.data()[i]);
  }
  return make_op({1}, {total}, {x.node(), y.node()}, [](Node& self) {
    Node& X = *self.parents[0];
    Node& Y = *self.parents[1];
    const double g = self.grad[0];
    if (X.requires_grad) X.ensure_grad();
    if (Y.requires_grad) Y.ensure_grad();
    for (std::size_t i = 0; i < X.value.size(); ++i) {
      const double d = X.value[i] - Y.value[i];
      const double s = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (X.requires_grad) X.grad[i] += s * g;
      if (Y.requires_grad) Y.grad[i] -= s * g;
    }
  });
}

Tensor dot(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || v.rank() != 1 || u.numel() != v.numel()) {
    throw ShapeError("dot: rank-1 tensors of equal length required, " +
                     shape_str(u.shape()) + " vs " + shape_str(v.shape()));
  }
  double total = 0.0;
  for (std::int64_t i = 0; i < u.numel(); ++i) total += u.data()[i] * v.data()[i];
  return make_op({1}, {total}, {u.node(), v.node()}, [](Node& self) {
    Node& U = *self.parents[0];
    Node& V = *self.parents[1];
    const double g = self.grad[0];
    if (U.requires_grad) {
      U.ensure_grad();
      for (std::size_t i = 0; i < U.value.size(); ++i) U.grad[i] += g * V.value[i];
    }
    if (V.requires_grad) {
      V.ensure_grad();
      for (std::size_t i = 0; i < V.value.size(); ++i) V.grad[i] += g * U.value[i];
    }
  });
}

Tensor custom_elementwise(const Tensor& x, std::function<double(double)> f,
                          std::function<double(double)> df) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_op(x.shape(), std::move(out), {x.node()},
                 [df = std::move(df)](Node& self) {
                   Node& X = *self.parents[0];
                   if (!X.requires_grad) return;
                   X.ensure_grad();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     X.grad[i] += df(X.value[i]) * self.grad[i];
                 });
}

}  // namespace sqa
