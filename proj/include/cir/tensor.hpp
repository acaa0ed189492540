#pragma once

// Dense 64-bit tensors with reverse-mode differentiation.
//
// A Variable owns a node in a dynamically built graph. Every op records its
// parents and a backward closure only when at least one input requires a
// gradient, so inference over non-trainable inputs builds no graph.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cir {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major dense array of doubles. Rank 0 is a scalar.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, {value}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// Value of a single-element tensor.
  double item() const;

  bool all_finite() const;
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

namespace detail {
struct Node;
}

class Variable {
 public:
  Variable();
  explicit Variable(Tensor value, bool requires_grad = false);

  const Tensor& value() const;
  /// In-place access for optimizers and finite-difference probes. Never
  /// mutate a value that an unevaluated backward pass still depends on.
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient buffer; zero-filled when nothing has been accumulated yet.
  Tensor grad() const;
  void zero_grad();

  /// Reverse sweep from this scalar, accumulating into every reachable
  /// node that requires a gradient.
  void backward();

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  static Variable from_op(Tensor value, std::vector<Variable> parents,
                          std::function<void(const Tensor&)> backward);

 private:
  explicit Variable(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;

  friend void accumulate_grad(const Variable& v, const Tensor& g);
};

void accumulate_grad(const Variable& v, const Tensor& g);

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Variable constant(Tensor value);
Variable parameter(Tensor value);

/// A trainable tensor with its checkpoint key, e.g. "composer.H.w_query".
struct NamedParameter {
  std::string name;
  Variable value;
};

// ---- Ops. Shapes: vectors are rank 1, matrices rank 2. ----

Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable scale(const Variable& a, double factor);
Variable add_scalar(const Variable& a, double offset);

/// x (m×n) + b (n) broadcast over rows.
Variable add_row_bias(const Variable& x, const Variable& b);
Variable matmul(const Variable& a, const Variable& b);
Variable transpose(const Variable& a);
Variable reshape(const Variable& a, Shape shape);

Variable sigmoid(const Variable& a);
/// tanh approximation of GELU.
Variable gelu(const Variable& a);
Variable softmax_rows(const Variable& a);
/// Per-row normalization with learned gain/bias of length n.
Variable layer_norm_rows(const Variable& x, const Variable& gain,
                         const Variable& bias, double eps = 1e-5);

/// Mean over the rows of an m×n matrix, giving a length-n vector.
Variable mean_rows(const Variable& x);
Variable sum(const Variable& a);
Variable dot(const Variable& a, const Variable& b);

inline constexpr double kCosineEps = 1e-12;

/// u·v / (‖u‖‖v‖ + 1e-12); zero vectors give 0.
Variable cosine_similarity(const Variable& u, const Variable& v);

/// softmax(QKᵀ/√d) V with row-wise softmax.
Variable scaled_dot_attention(const Variable& q, const Variable& k,
                              const Variable& v);

/// Pack scalars into a rows×cols matrix (row-major order).
Variable stack_scalars(std::span<const Variable> scalars, std::size_t rows,
                       std::size_t cols);

inline Variable operator+(const Variable& a, const Variable& b) { return add(a, b); }
inline Variable operator-(const Variable& a, const Variable& b) { return sub(a, b); }
inline Variable operator*(const Variable& a, const Variable& b) { return mul(a, b); }
inline Variable operator*(double c, const Variable& a) { return scale(a, c); }

// ---- Finite-difference gradient check ----

struct GradCheckOptions {
  double eps = 1e-5;
  /// Coordinates probed per parameter tensor; 0 probes every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. The error per coordinate is |analytic − numeric| /
/// max(1, |numeric|). `f` must rebuild its graph from the current parameter
/// values on every call.
GradCheckResult gradient_check(const std::function<Variable()>& f,
                               std::span<const Variable> params,
                               const GradCheckOptions& options = {});

}  // namespace cir
