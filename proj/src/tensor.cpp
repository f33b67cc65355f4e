#include "gnmr/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gnmr/error.hpp"

namespace gnmr {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " +
                         shape_to_string(a.shape()));
  }
}

// Bias broadcast: a is R x C and b has C elements laid out as {C} or {1, C}.
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return false;
  const bool row_like = (b.rank() == 1) || (b.rank() == 2 && b.shape()[0] == 1);
  return row_like && a.rank() >= 1 && b.numel() == a.cols();
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->values.assign(product(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (product(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " holds " +
                         std::to_string(product(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  Tensor t(std::move(impl));
  t.check_finite("tensor");
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

std::size_t Tensor::cols() const { return rank() == 0 ? 1 : shape().back(); }

std::size_t Tensor::rows() const {
  const std::size_t c = cols();
  return c == 0 ? 0 : numel() / c;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->values[0];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), impl_->values, false); }

void Tensor::check_finite(const std::string& what) const {
  for (std::size_t i = 0; i < impl_->values.size(); ++i) {
    if (!std::isfinite(impl_->values[i])) {
      throw NumericalError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor Tape::make(Shape shape, std::vector<double> values, bool tracked) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = tracked;
  return Tensor(std::move(impl));
}

void Tape::record(const Tensor& out, std::function<void(TensorImpl&)> fn) {
  entries_.push_back(Entry{out.shared(), std::move(fn)});
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, n);
  const bool tracked = tracks({&a, &b});
  Tensor y = make({m, n}, std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), bi = b.shared(), m, k, n](TensorImpl& o) {
      MapC g(o.grad.data(), m, n);
      if (ai->requires_grad) {
        ai->ensure_grad();
        Map(ai->grad.data(), m, k).noalias() += g * MapC(bi->values.data(), k, n).transpose();
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        Map(bi->grad.data(), k, n).noalias() += MapC(ai->values.data(), m, k).transpose() * g;
      }
    });
  }
  return y;
}

Tensor Tape::transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  Map(out.data(), n, m) = MapC(a.values().data(), m, n).transpose();
  const bool tracked = tracks({&a});
  Tensor y = make({n, m}, std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), m, n](TensorImpl& o) {
      ai->ensure_grad();
      Map(ai->grad.data(), m, n) += MapC(o.grad.data(), n, m).transpose();
    });
  }
  return y;
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (product(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  const bool tracked = tracks({&a});
  Tensor y = make(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()), tracked);
  if (tracked) {
    record(y, [ai = a.shared()](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
    });
  }
  return y;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const bool broadcast = is_row_broadcast(a, b);
  if (!broadcast) require_same_shape("add", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t cols = broadcast ? b.numel() : 1;
  std::vector<double> out(av.size());
  if (broadcast) {
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % cols];
  } else {
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  }
  const bool tracked = tracks({&a, &b});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), bi = b.shared(), broadcast, cols](TensorImpl& o) {
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        if (broadcast) {
          for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i % cols] += o.grad[i];
        } else {
          for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] += o.grad[i];
        }
      }
    });
  }
  return y;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const bool tracked = tracks({&a, &b});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), bi = b.shared()](TensorImpl& o) {
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] -= o.grad[i];
      }
    });
  }
  return y;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const bool tracked = tracks({&a, &b});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), bi = b.shared()](TensorImpl& o) {
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i] * bi->values[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] += o.grad[i] * ai->values[i];
      }
    });
  }
  return y;
}

Tensor Tape::scale(const Tensor& a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  const bool tracked = tracks({&a});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), factor](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i] * factor;
    });
  }
  return y;
}

Tensor Tape::sigmoid(const Tensor& a) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
  const bool tracked = tracks({&a});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared()](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double s = o.values[i];
        ai->grad[i] += o.grad[i] * s * (1.0 - s);
      }
    });
  }
  return y;
}

Tensor Tape::tanh(const Tensor& a) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
  const bool tracked = tracks({&a});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared()](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double t = o.values[i];
        ai->grad[i] += o.grad[i] * (1.0 - t * t);
      }
    });
  }
  return y;
}

Tensor Tape::leaky_relu(const Tensor& a, double alpha) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : alpha * av[i];
  const bool tracked = tracks({&a});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), alpha](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        ai->grad[i] += o.grad[i] * (ai->values[i] > 0.0 ? 1.0 : alpha);
      }
    });
  }
  return y;
}

Tensor Tape::gate_mix(const Tensor& z, const Tensor& a, const Tensor& b) {
  require_same_shape("gate_mix", z, a);
  require_same_shape("gate_mix", z, b);
  const auto zv = z.values();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(zv.size());
  for (std::size_t i = 0; i < zv.size(); ++i) out[i] = (1.0 - zv[i]) * av[i] + zv[i] * bv[i];
  const bool tracked = tracks({&z, &a, &b});
  Tensor y = make(z.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [zi = z.shared(), ai = a.shared(), bi = b.shared()](TensorImpl& o) {
      const std::size_t n = o.grad.size();
      if (zi->requires_grad) {
        zi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) zi->grad[i] += o.grad[i] * (bi->values[i] - ai->values[i]);
      }
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) ai->grad[i] += o.grad[i] * (1.0 - zi->values[i]);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) bi->grad[i] += o.grad[i] * zi->values[i];
      }
    });
  }
  return y;
}

Tensor Tape::softmax_lastdim(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = av.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  const bool tracked = tracks({&a});
  Tensor y = make(a.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), rows, cols](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* s = o.values.data() + r * cols;
        const double* g = o.grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[c] * s[c];
        for (std::size_t c = 0; c < cols; ++c) ai->grad[r * cols + c] += s[c] * (g[c] - dot);
      }
    });
  }
  return y;
}

Tensor Tape::concat_lastdim(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_lastdim: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_lastdim: row counts differ (" + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()) + ")");
    }
    total += p.cols();
    tracked = tracked || p.requires_grad();
  }
  tracked = tracked && recording_;
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    const auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * c, c, out.data() + r * total + offset);
    }
    offset += c;
  }
  Tensor y = make({rows, total}, std::move(out), tracked);
  if (tracked) {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    for (const auto& p : parts) inputs.push_back(p.shared());
    record(y, [inputs = std::move(inputs), rows, total](TensorImpl& o) {
      std::size_t off = 0;
      for (const auto& in : inputs) {
        const std::size_t c = in->shape.empty() ? 1 : in->shape.back();
        if (in->requires_grad) {
          in->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) in->grad[r * c + j] += o.grad[r * total + off + j];
          }
        }
        off += c;
      }
    });
  }
  return y;
}

Tensor Tape::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column counts differ (" + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()) + ")");
    }
    rows += p.rows();
    tracked = tracked || p.requires_grad();
  }
  tracked = tracked && recording_;
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Tensor y = make({rows, cols}, std::move(out), tracked);
  if (tracked) {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    for (const auto& p : parts) inputs.push_back(p.shared());
    record(y, [inputs = std::move(inputs)](TensorImpl& o) {
      std::size_t off = 0;
      for (const auto& in : inputs) {
        const std::size_t n = in->values.size();
        if (in->requires_grad) {
          in->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) in->grad[i] += o.grad[off + i];
        }
        off += n;
      }
    });
  }
  return y;
}

Tensor Tape::slice_lastdim(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (begin > end || end > cols) {
    throw DimensionError("slice_lastdim: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + shape_to_string(a.shape()));
  }
  const std::size_t width = end - begin;
  std::vector<double> out(rows * width);
  const auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(av.data() + r * cols + begin, width, out.data() + r * width);
  const bool tracked = tracks({&a});
  Tensor y = make({rows, width}, std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), rows, cols, begin, width](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < width; ++j) ai->grad[r * cols + begin + j] += o.grad[r * width + j];
      }
    });
  }
  return y;
}

Tensor Tape::slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (begin > end || end > rows) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + shape_to_string(a.shape()));
  }
  const auto av = a.values();
  std::vector<double> out(av.begin() + begin * cols, av.begin() + end * cols);
  const bool tracked = tracks({&a});
  Tensor y = make({end - begin, cols}, std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), offset = begin * cols](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[offset + i] += o.grad[i];
    });
  }
  return y;
}

Tensor Tape::permute_rows(const Tensor& a, std::span<const std::size_t> order) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (order.size() != rows) {
    throw DimensionError("permute_rows: order has " + std::to_string(order.size()) + " entries for " +
                         std::to_string(rows) + " rows");
  }
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    if (order[r] >= rows) throw DimensionError("permute_rows: index out of range");
    std::copy_n(av.data() + order[r] * cols, cols, out.data() + r * cols);
  }
  const bool tracked = tracks({&a});
  Tensor y = make({rows, cols}, std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), idx = std::vector<std::size_t>(order.begin(), order.end()), cols](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) ai->grad[idx[r] * cols + c] += o.grad[r * cols + c];
      }
    });
  }
  return y;
}

Tensor Tape::sum(const Tensor& a) {
  const auto av = a.values();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  const bool tracked = tracks({&a});
  Tensor y = make({}, {total}, tracked);
  if (tracked) {
    record(y, [ai = a.shared()](TensorImpl& o) {
      ai->ensure_grad();
      for (auto& g : ai->grad) g += o.grad[0];
    });
  }
  return y;
}

Tensor Tape::sum_lastdim(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  const auto av = a.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += av[r * cols + c];
  }
  const bool tracked = tracks({&a});
  Tensor y = make({rows, 1}, std::move(out), tracked);
  if (tracked) {
    record(y, [ai = a.shared(), cols](TensorImpl& o) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += o.grad[i / cols];
    });
  }
  return y;
}

Tensor Tape::dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  const auto xv = x.values();
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  const bool tracked = tracks({&x});
  Tensor y = make(x.shape(), std::move(out), tracked);
  if (tracked) {
    record(y, [xi = x.shared(), mask = std::move(mask)](TensorImpl& o) {
      xi->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] * mask[i];
    });
  }
  return y;
}

Tensor Tape::mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.numel() != target.numel()) {
    throw DimensionError("mse_loss: prediction " + shape_to_string(pred.shape()) + " vs target " +
                         shape_to_string(target.shape()));
  }
  const std::size_t n = pred.numel();
  if (n == 0) throw ContractError("mse_loss: empty batch");
  const auto pv = pred.values();
  const auto tv = target.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (pv[i] - tv[i]) * (pv[i] - tv[i]);
  const bool tracked = tracks({&pred, &target});
  Tensor y = make({}, {total / static_cast<double>(n)}, tracked);
  if (tracked) {
    record(y, [pi = pred.shared(), ti = target.shared(), n](TensorImpl& o) {
      const double k = 2.0 * o.grad[0] / static_cast<double>(n);
      if (pi->requires_grad) {
        pi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) pi->grad[i] += k * (pi->values[i] - ti->values[i]);
      }
      if (ti->requires_grad) {
        ti->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) ti->grad[i] -= k * (pi->values[i] - ti->values[i]);
      }
    });
  }
  return y;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw ContractError("backward: tape already replayed; record a new tape for another pass");
  }
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  }
  if (!recording_ || !loss.requires_grad()) {
    throw ContractError("backward: loss was not produced by a recording tape from trainable inputs");
  }
  const bool on_tape = std::any_of(entries_.begin(), entries_.end(),
                                   [&](const Entry& e) { return e.out.get() == loss.impl(); });
  if (!on_tape) throw ContractError("backward: loss was not recorded on this tape");

  consumed_ = true;
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out->grad.empty()) continue;
    it->backward(*it->out);
  }
}

}  // namespace gnmr
