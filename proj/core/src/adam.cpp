#include "sqa/adam.hpp"

#include <cmath>
#include <string>

#include "sqa/error.hpp"

namespace sqa {

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  shapes_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
    shapes_.push_back(p.shape());
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " params for state of " + std::to_string(state.m_.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(params[i].shape(), state.shapes_[i])) {
      throw ShapeError("adam_step: param " + std::to_string(i) + " shape " +
                       shape_str(params[i].shape()) + " does not match state shape " +
                       shape_str(state.shapes_[i]));
    }
  }
  state.step_count_ += 1;
  const auto& c = state.cfg_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].raw_data();
    const auto& g = params[i].grad();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace sqa
