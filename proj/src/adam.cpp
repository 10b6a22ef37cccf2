#include "mkfusion/adam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mkfusion {

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(k) + " has no gradient");
    }
    if (state.first_moment[k].size() != params[k]->size()) {
      throw ShapeError("adam_step: moment size mismatch for parameter " + std::to_string(k));
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    auto grad = p.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

void clip_weights(std::span<Tensor* const> params, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip_weights: clip constant must be positive");
  for (Tensor* p : params) {
    for (double& v : p->data()) v = std::clamp(v, -c, c);
  }
}

void zero_grads(std::span<Tensor* const> params) {
  for (Tensor* p : params) p->zero_grad();
}

}  // namespace mkfusion
