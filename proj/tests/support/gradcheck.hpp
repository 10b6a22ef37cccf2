#pragma once

// Central finite-difference oracle for tape gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mkfusion/adam.hpp"
#include "mkfusion/autodiff.hpp"
#include "mkfusion/rng.hpp"

namespace mkfusion::testing {

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;  // over probes above the absolute floor
  double worst_abs = 0.0;
  double largest_grad = 0.0;
  std::string first_failure;
};

inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-4,
                       double abs_floor = 1e-6) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= abs_floor) return true;
  return diff / std::max(std::abs(analytic), std::abs(numeric)) <= rel_tol;
}

// `build` records a fresh forward pass and returns the scalar loss; it must
// bind `params` with Tape::parameter. Probes `coords` coordinates drawn
// uniformly over all parameter entries (every entry when coords == 0).
inline GradCheck gradcheck(const std::function<Var(Tape&)>& build, std::vector<Tensor*> params,
                           std::size_t coords, Rng& rng, double h = 1e-6) {
  zero_grads(params);
  {
    Tape tape;
    tape.backward(build(tape));
  }
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  std::size_t total = 0;
  for (Tensor* p : params) total += p->size();
  if (coords == 0) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i]->size(); ++j) probes.emplace_back(i, j);
    }
  } else {
    for (std::size_t n = 0; n < coords; ++n) {
      std::size_t flat = rng.index(total);
      std::size_t i = 0;
      while (flat >= params[i]->size()) flat -= params[i++]->size();
      probes.emplace_back(i, flat);
    }
  }
  auto eval = [&] {
    Tape tape;
    return build(tape).item();
  };
  GradCheck out;
  for (auto [i, j] : probes) {
    Tensor& p = *params[i];
    const double analytic = p.has_grad() ? p.grad()[j] : 0.0;
    const double saved = p[j];
    p[j] = saved + h;
    const double up = eval();
    p[j] = saved - h;
    const double down = eval();
    p[j] = saved;
    const double numeric = (up - down) / (2.0 * h);
    ++out.checked;
    const double diff = std::abs(analytic - numeric);
    out.worst_abs = std::max(out.worst_abs, diff);
    out.largest_grad = std::max(out.largest_grad, std::abs(analytic));
    if (diff > 1e-6) {
      out.worst_rel =
          std::max(out.worst_rel, diff / std::max(std::abs(analytic), std::abs(numeric)));
    }
    if (!grad_close(analytic, numeric)) {
      if (out.failures++ == 0) {
        out.first_failure = "param " + std::to_string(i) + "[" + std::to_string(j) +
                            "]: analytic " + std::to_string(analytic) + " vs numeric " +
                            std::to_string(numeric);
      }
    }
  }
  zero_grads(params);
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace mkfusion::testing
