#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mkfusion/tensor.hpp"

namespace mkfusion {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

// Moment estimates for one parameter group. Moments are sized on the first
// step and must keep matching the parameter shapes afterwards.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Bias-corrected Adam update using each parameter's accumulated grad.
void adam_step(std::span<Tensor* const> params, AdamState& state);

// Clamps every entry into [-c, c].
void clip_weights(std::span<Tensor* const> params, double c);

void zero_grads(std::span<Tensor* const> params);

}  // namespace mkfusion
