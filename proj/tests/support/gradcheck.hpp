#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gnmr/rng.hpp"
#include "gnmr/tensor.hpp"

namespace gnmr::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Worst norm-wise relative error ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||, floor)
/// over the given inputs, using central differences of step h. The floor keeps
/// gradients that vanish identically (softmax shift invariance) from comparing
/// rounding noise against rounding noise.
inline double gradcheck(const std::function<Tensor(Tape&)>& loss_fn, std::vector<Tensor> inputs, double h = 1e-6,
                        double floor = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic = t.grad();
    auto values = t.mutable_values();
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      double up;
      {
        Tape tape(false);
        up = loss_fn(tape).item();
      }
      values[i] = saved - h;
      double down;
      {
        Tape tape(false);
        down = loss_fn(tape).item();
      }
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), floor});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

/// Contracts any tensor to a scalar with fixed random weights so every output
/// element carries a distinct upstream gradient.
inline Tensor weighted_sum(Tape& tape, const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Tensor w = random_tensor(y.shape(), rng, -1.0, 1.0, false);
  return tape.sum(tape.mul(y, w));
}

}  // namespace gnmr::testing
