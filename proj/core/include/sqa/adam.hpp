#pragma once

#include <cstdint>
#include <vector>

#include "sqa/tensor.hpp"

namespace sqa {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment slots are allocated against a fixed parameter
/// list; every step must pass tensors of the same shapes in the same order.
class AdamState {
 public:
  AdamState(const std::vector<Tensor>& params, AdamConfig cfg = {});

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  friend void adam_step(std::vector<Tensor>& params, AdamState& state);

  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<Shape> shapes_;
  std::int64_t step_count_ = 0;
};

/// Applies one in-place update using each parameter's accumulated gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace sqa
