#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sqa/error.hpp"
#include "sqa/rng.hpp"

namespace sqa {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

namespace detail {

/// One vertex of the computation graph. Owns its value and, for nodes that
/// participate in differentiation, a same-shape gradient accumulator.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  /// Accumulates this node's grad into the parents' grads.
  std::function<void(Node&)> backprop;

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Value-semantics handle to a graph node. Copies alias the same node; the
/// graph a tensor was produced by stays alive for as long as some handle can
/// still reach it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);
  static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi,
                             bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const;
  std::int64_t rank() const;
  /// Row/column counts; rank-2 only.
  std::int64_t rows() const;
  std::int64_t cols() const;

  bool requires_grad() const;
  const std::vector<double>& data() const;
  /// Mutable view of the raw values, for optimizers and in-place setup.
  /// Mutating a tensor that has downstream graph invalidates that graph.
  std::vector<double>& raw_data();

  double scalar_value() const;
  double at(std::int64_t i) const;
  double at(std::int64_t r, std::int64_t c) const;

  /// Gradient accumulator. Requires requires_grad; zeros until a backward
  /// pass has reached this tensor.
  const std::vector<double>& grad() const;
  void zero_grad();

  /// A constant copy that shares no graph history with this tensor.
  Tensor detached() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients of every reachable
/// tensor with requires_grad are accumulated (repeated calls without
/// zero_grad add up).
void backward(const Tensor& loss);

}  // namespace sqa
