#include "gnmr/layers.hpp"

#include <cmath>

#include "gnmr/error.hpp"

namespace gnmr {

Dense::Dense(std::size_t in, std::size_t out)
    : weight(Tensor::zeros({in, out}, true)), bias(Tensor::zeros({out}, true)) {}

Tensor Dense::forward(Tape& tape, const Tensor& x) const { return tape.add(tape.matmul(x, weight), bias); }

void Dense::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

FeedForward::FeedForward(std::size_t in, std::size_t width, std::size_t depth) {
  for (std::size_t i = 0; i < depth; ++i) layers.emplace_back(i == 0 ? in : width, width);
}

Tensor FeedForward::forward(Tape& tape, const Tensor& x, double slope, double dropout, Rng& rng,
                            bool training) const {
  Tensor h = x;
  for (const auto& layer : layers) {
    h = tape.dropout(tape.leaky_relu(layer.forward(tape, h), slope), dropout, rng, training);
  }
  return h;
}

void FeedForward::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".l" + std::to_string(i), out);
}

GruCell::GruCell(std::size_t in, std::size_t hidden)
    : w_input(Tensor::zeros({in, 3 * hidden}, true)),
      bias(Tensor::zeros({3 * hidden}, true)),
      u_gates(Tensor::zeros({hidden, 2 * hidden}, true)),
      u_candidate(Tensor::zeros({hidden, hidden}, true)) {}

Tensor GruCell::project(Tape& tape, const Tensor& x) const {
  if (x.cols() != input()) {
    throw DimensionError("gru: input width " + std::to_string(x.cols()) + " != " + std::to_string(input()));
  }
  return tape.add(tape.matmul(x, w_input), bias);
}

Tensor GruCell::step(Tape& tape, const Tensor& projected, const Tensor& h, std::optional<double> pinned_update,
                     GateTrace* trace) const {
  const std::size_t d = hidden();
  const Tensor gates = tape.sigmoid(
      tape.add(tape.slice_lastdim(projected, 0, 2 * d), tape.matmul(h, u_gates)));
  Tensor z = tape.slice_lastdim(gates, 0, d);
  const Tensor r = tape.slice_lastdim(gates, d, 2 * d);
  if (pinned_update) z = Tensor::full(z.shape(), *pinned_update);
  const Tensor candidate = tape.tanh(
      tape.add(tape.slice_lastdim(projected, 2 * d, 3 * d), tape.matmul(tape.mul(r, h), u_candidate)));
  if (trace) *trace = GateTrace{z, r, candidate};
  return tape.gate_mix(z, h, candidate);
}

void GruCell::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w_input", w_input});
  out.push_back({prefix + ".bias", bias});
  out.push_back({prefix + ".u_gates", u_gates});
  out.push_back({prefix + ".u_candidate", u_candidate});
}

GruStack::GruStack(std::size_t in, std::size_t hidden, std::size_t depth) {
  if (depth == 0) throw ConfigError("GRU stack needs at least one layer");
  for (std::size_t i = 0; i < depth; ++i) layers.emplace_back(i == 0 ? in : hidden, hidden);
}

Tensor GruStack::final_state(Tape& tape, const Tensor& x, std::size_t steps, std::size_t rows_per_step) const {
  if (x.rows() != steps * rows_per_step) {
    throw DimensionError("gru: expected " + std::to_string(steps * rows_per_step) + " rows, got " +
                         std::to_string(x.rows()));
  }
  Tensor input = x;
  Tensor h;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& cell = layers[l];
    const Tensor projected = cell.project(tape, input);
    h = Tensor::zeros({rows_per_step, cell.hidden()});
    std::vector<Tensor> states;
    const bool keep = l + 1 < layers.size();
    if (keep) states.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      h = cell.step(tape, tape.slice_rows(projected, t * rows_per_step, (t + 1) * rows_per_step), h);
      if (keep) states.push_back(h);
    }
    if (keep) input = tape.concat_rows(states);
  }
  return h;
}

void GruStack::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".l" + std::to_string(i), out);
}

void init_uniform(std::vector<NamedTensor>& params, Rng& rng) {
  for (auto& p : params) {
    auto values = p.value.mutable_values();
    const bool is_bias = p.name.size() >= 4 && p.name.compare(p.name.size() - 4, 4, "bias") == 0;
    if (is_bias || p.value.rank() != 2) {
      std::fill(values.begin(), values.end(), 0.0);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.value.shape()[0]));
    for (auto& v : values) v = rng.uniform(-bound, bound);
  }
}

}  // namespace gnmr
