#pragma once

// Reverse-mode automatic differentiation over dense f64 tensors.
//
// A Tensor is a shared handle; copies alias the same buffer. Operations are
// issued through a Tape which records, for every output that depends on a
// requires_grad input, a closure that pushes the output gradient back to its
// inputs. Tape::backward replays those closures once, in reverse order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gnmr/rng.hpp"

namespace gnmr {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;

  void ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  /// Throws DimensionError on size mismatch and NumericalError on non-finite values.
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->values.size(); }
  /// Leading extent when viewed as a matrix over the last dimension.
  std::size_t rows() const;
  /// Size of the last dimension (1 for scalars).
  std::size_t cols() const;

  std::span<const double> values() const { return impl_->values; }
  std::span<double> mutable_values() { return impl_->values; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return impl_->values[r * cols() + c]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values with no tape history.
  Tensor detach() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

  /// Throws NumericalError naming `what` when any value is NaN or Inf.
  void check_finite(const std::string& what) const;

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend class Tape;

  std::shared_ptr<TensorImpl> impl_;
};

class Tape {
 public:
  /// A non-recording tape evaluates values only (inference).
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }

  // Linear algebra.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);
  Tensor reshape(const Tensor& a, Shape shape);

  // Elementwise. `add` also broadcasts a bias of shape {n} or {1,n} over rows.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double factor);
  Tensor sigmoid(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor leaky_relu(const Tensor& a, double alpha);
  /// (1 - z) * a + z * b, elementwise.
  Tensor gate_mix(const Tensor& z, const Tensor& a, const Tensor& b);

  Tensor softmax_lastdim(const Tensor& a);
  Tensor concat_lastdim(std::span<const Tensor> parts);
  Tensor concat_rows(std::span<const Tensor> parts);
  Tensor slice_lastdim(const Tensor& a, std::size_t begin, std::size_t end);
  Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
  /// out row i = a row order[i]; `order` must be a permutation.
  Tensor permute_rows(const Tensor& a, std::span<const std::size_t> order);

  Tensor sum(const Tensor& a);
  Tensor sum_lastdim(const Tensor& a);

  /// Inverted dropout; identity when !training or rate == 0.
  Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

  /// Mean squared difference over all elements.
  Tensor mse_loss(const Tensor& pred, const Tensor& target);

  /// Populates grad of every requires_grad tensor reachable from `loss`.
  /// Gradients accumulate into leaves; a tape may run backward only once.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> out;
    std::function<void(TensorImpl& out)> backward;
  };

  bool tracks(std::initializer_list<const Tensor*> inputs) const;
  Tensor make(Shape shape, std::vector<double> values, bool tracked);
  void record(const Tensor& out, std::function<void(TensorImpl&)> fn);

  bool recording_;
  bool consumed_ = false;
  std::vector<Entry> entries_;
};

}  // namespace gnmr
