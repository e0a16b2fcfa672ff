#pragma once

#include <doctest.h>

#include <functional>

#include "reorient/nn.hpp"

// Central finite differences against the analytic gradients accumulated by a
// backward pass. `loss` must be a pure forward evaluation; `backward` must
// zero the grads, then run forward + backward once.
inline void check_param_gradients(
    const std::vector<reorient::nn::ParamRef<double>>& params,
    const std::function<double()>& loss, const std::function<void()>& backward,
    double tol = 1e-4, double step = 1e-5) {
  backward();
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      const double analytic = p.grad->data()[i];
      const double saved = p.value->data()[i];
      p.value->data()[i] = saved + step;
      const double up = loss();
      p.value->data()[i] = saved - step;
      const double down = loss();
      p.value->data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      INFO("param ", p.name, " index ", i, " analytic ", analytic, " numeric ",
           numeric);
      CHECK(std::abs(analytic - numeric) <= tol * scale);
    }
  }
}

// Same for an input matrix whose analytic gradient was produced by backward().
inline void check_input_gradient(
    reorient::nn::MatX<double>& input,
    const reorient::nn::MatX<double>& analytic_grad,
    const std::function<double()>& loss, double tol = 1e-4,
    double step = 1e-5) {
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    const double saved = input.data()[i];
    input.data()[i] = saved + step;
    const double up = loss();
    input.data()[i] = saved - step;
    const double down = loss();
    input.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = analytic_grad.data()[i];
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    INFO("input index ", i);
    CHECK(std::abs(analytic - numeric) <= tol * scale);
  }
}
