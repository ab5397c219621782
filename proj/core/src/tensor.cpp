#include "sqa/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace sqa {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  const auto n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  const auto n = shape_numel(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.normal(0.0, stddev);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi,
                            bool requires_grad) {
  const auto n = shape_numel(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(lo, hi);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data().size()); }

std::int64_t Tensor::rank() const { return static_cast<std::int64_t>(shape().size()); }

std::int64_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not rank-2, shape " + shape_str(shape()));
  return shape()[0];
}

std::int64_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not rank-2, shape " + shape_str(shape()));
  return shape()[1];
}

bool Tensor::requires_grad() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->requires_grad;
}

const std::vector<double>& Tensor::data() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->value;
}

std::vector<double>& Tensor::raw_data() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->value;
}

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw ContractError("scalar_value(): tensor has " + std::to_string(numel()) +
                        " elements");
  }
  return data()[0];
}

double Tensor::at(std::int64_t i) const {
  if (i < 0 || i >= numel()) throw IndexError("tensor index out of range");
  return data()[static_cast<std::size_t>(i)];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
  if (r < 0 || r >= rows() || c < 0 || c >= cols()) {
    throw IndexError("tensor index out of range");
  }
  return data()[static_cast<std::size_t>(r * cols() + c)];
}

const std::vector<double>& Tensor::grad() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (!node_->requires_grad) {
    throw ContractError("grad(): tensor does not require gradients");
  }
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detached() const {
  return from_data(shape(), data(), /*requires_grad=*/false);
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss.shape()));
  }
  auto root = loss.node();
  if (!root->requires_grad) return;  // nothing reachable to differentiate

  // Topological order via iterative DFS.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (auto* n : order) n->ensure_grad();
  root->grad[0] += 1.0;

  // `order` is children-after-parents reversed; walk from the root down.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace sqa
