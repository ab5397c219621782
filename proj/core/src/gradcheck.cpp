#include "sqa/gradcheck.hpp"

#include <cmath>

#include "sqa/error.hpp"

namespace sqa {

namespace {

void check_scalar_deterministic(const std::function<Tensor()>& eval) {
  const Tensor y1 = eval();
  if (y1.numel() != 1) {
    throw ContractError("finite_difference_check: f must return a scalar");
  }
  const Tensor y2 = eval();
  if (y1.scalar_value() != y2.scalar_value()) {
    throw ContractError("finite_difference_check: f is not deterministic");
  }
}

double sweep_params(const std::function<Tensor()>& loss, std::vector<Tensor>& params,
                    double eps) {
  if (eps <= 0.0) throw ContractError("finite_difference_check: eps must be > 0");
  check_scalar_deterministic(loss);

  for (auto& p : params) p.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& data = params[k].raw_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double hi = loss().scalar_value();
      data[i] = saved - eps;
      const double lo = loss().scalar_value();
      data[i] = saved;
      const double numeric = (hi - lo) / (2.0 * eps);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               Tensor x, double eps) {
  if (!x.requires_grad()) {
    throw ContractError("finite_difference_check: x must require gradients");
  }
  std::vector<Tensor> params{x};
  return sweep_params([&] { return f(params[0]); }, params, eps);
}

double finite_difference_check_params(const std::function<Tensor()>& loss,
                                      std::vector<Tensor>& params, double eps) {
  for (const auto& p : params) {
    if (!p.requires_grad()) {
      throw ContractError("finite_difference_check: all params must require gradients");
    }
  }
  return sweep_params(loss, params, eps);
}

}  // namespace sqa
