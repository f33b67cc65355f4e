#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gnmr/rng.hpp"
#include "gnmr/tensor.hpp"

namespace gnmr {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// y = x W + b with W stored in x out.
struct Dense {
  Tensor weight;
  Tensor bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out);

  std::size_t in() const { return weight.shape()[0]; }
  std::size_t out() const { return weight.shape()[1]; }
  Tensor forward(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Stack of Dense layers, each followed by leaky ReLU and dropout.
struct FeedForward {
  std::vector<Dense> layers;

  FeedForward() = default;
  FeedForward(std::size_t in, std::size_t width, std::size_t depth);

  std::size_t out() const { return layers.back().out(); }
  Tensor forward(Tape& tape, const Tensor& x, double slope, double dropout, Rng& rng, bool training) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Gate activations of one recurrent step, kept for inspection.
struct GateTrace {
  Tensor update;     // z
  Tensor reset;      // r
  Tensor candidate;  // tanh(...)
};

/// GRU transition with the reset gate applied before the recurrent product:
///   z = s(x Wz + h Uz + bz),  r = s(x Wr + h Ur + br)
///   c = tanh(x Wc + (r*h) Uc + bc),  h' = (1 - z) h + z c
/// Input weights for the three gates are packed as in x [z | r | c].
struct GruCell {
  Tensor w_input;     // in x 3d
  Tensor bias;        // 3d
  Tensor u_gates;     // d x 2d, [z | r]
  Tensor u_candidate; // d x d

  GruCell() = default;
  GruCell(std::size_t in, std::size_t hidden);

  std::size_t input() const { return w_input.shape()[0]; }
  std::size_t hidden() const { return u_candidate.shape()[0]; }

  /// x W + b for a block of rows (usually every time step at once).
  Tensor project(Tape& tape, const Tensor& x) const;
  /// One transition from pre-projected input rows. `pinned_update` replaces z
  /// with a constant (used to probe the convex-update endpoints).
  Tensor step(Tape& tape, const Tensor& projected, const Tensor& h,
              std::optional<double> pinned_update = std::nullopt, GateTrace* trace = nullptr) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Multi-layer GRU over a time-major block of rows.
struct GruStack {
  std::vector<GruCell> layers;

  GruStack() = default;
  GruStack(std::size_t in, std::size_t hidden, std::size_t depth);

  /// `x` holds steps * rows_per_step rows, time-major. Returns the final
  /// hidden state of the top layer (rows_per_step x hidden).
  Tensor final_state(Tape& tape, const Tensor& x, std::size_t steps, std::size_t rows_per_step) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Uniform in +-1/sqrt(fan_in) for weight matrices, zero for biases
/// (parameters whose name ends in "bias").
void init_uniform(std::vector<NamedTensor>& params, Rng& rng);

}  // namespace gnmr
