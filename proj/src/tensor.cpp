#include "cir/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "cir/error.hpp"

namespace cir {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on non-matrix " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on non-matrix " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                         shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool grad_allocated = false;
  bool requires_grad = false;
  std::vector<Variable> parents;
  std::function<void(const Tensor&)> backward;
};

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(a.shape()));
  }
}

// C = op(A) · op(B), where op transposes when requested.
Tensor matmul_raw(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions differ (" +
                         std::to_string(k) + " vs " + std::to_string(kb) + ")");
  }
  Tensor c(Shape{m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = trans_a ? pa[p * lda + i] : pa[i * lda + p];
      if (aip == 0.0) continue;
      double* crow = pc + i * n;
      if (!trans_b) {
        const double* brow = pb + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * pb[j * ldb + p];
      }
    }
  }
  return c;
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Variable::Variable() : Variable(Tensor{}, false) {}

Variable::Variable(Tensor value, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Variable::Variable(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

const Tensor& Variable::value() const { return node_->value; }
Tensor& Variable::mutable_value() { return node_->value; }
bool Variable::requires_grad() const { return node_->requires_grad; }
bool Variable::has_grad() const { return node_->grad_allocated; }

Tensor Variable::grad() const {
  if (node_->grad_allocated) return node_->grad;
  return Tensor(node_->value.shape());
}

void Variable::zero_grad() {
  node_->grad = Tensor{};
  node_->grad_allocated = false;
}

void accumulate_grad(const Variable& v, const Tensor& g) {
  auto& node = *v.node_;
  if (!node.requires_grad) return;
  if (!node.grad_allocated) {
    node.grad = Tensor(node.value.shape());
    node.grad_allocated = true;
  }
  auto dst = node.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Variable Variable::from_op(Tensor value, std::vector<Variable> parents,
                           std::function<void(const Tensor&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  const bool needs = g_grad_enabled &&
                     std::any_of(parents.begin(), parents.end(),
                                 [](const Variable& p) { return p.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Variable(std::move(node));
}

void Variable::backward() {
  if (node_->value.size() != 1) {
    throw DimensionError("backward() requires a scalar, got " +
                         shape_string(node_->value.shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].node().get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  accumulate_grad(*this, Tensor(node_->value.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && node->grad_allocated) node->backward(node->grad);
  }
}

Variable constant(Tensor value) { return Variable(std::move(value), false); }
Variable parameter(Tensor value) { return Variable(std::move(value), true); }

Variable add(const Variable& a, const Variable& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    accumulate_grad(a, g);
    accumulate_grad(b, g);
  });
}

Variable sub(const Variable& a, const Variable& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    accumulate_grad(a, g);
    if (b.requires_grad()) {
      Tensor gb = g;
      for (auto& x : gb.data()) x = -x;
      accumulate_grad(b, gb);
    }
  });
}

Variable mul(const Variable& a, const Variable& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor ga = g;
      auto bd = b.value().data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bd[i];
      accumulate_grad(a, ga);
    }
    if (b.requires_grad()) {
      Tensor gb = g;
      auto ad = a.value().data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= ad[i];
      accumulate_grad(b, gb);
    }
  });
}

Variable scale(const Variable& a, double factor) {
  Tensor out = a.value();
  for (auto& x : out.data()) x *= factor;
  return Variable::from_op(std::move(out), {a}, [a, factor](const Tensor& g) {
    Tensor ga = g;
    for (auto& x : ga.data()) x *= factor;
    accumulate_grad(a, ga);
  });
}

Variable add_scalar(const Variable& a, double offset) {
  Tensor out = a.value();
  for (auto& x : out.data()) x += offset;
  return Variable::from_op(std::move(out), {a},
                           [a](const Tensor& g) { accumulate_grad(a, g); });
}

Variable add_row_bias(const Variable& x, const Variable& b) {
  const Tensor& xv = x.value();
  require_matrix(xv, "add_row_bias");
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  if (b.value().size() != n) {
    throw DimensionError("add_row_bias: bias length " +
                         std::to_string(b.value().size()) + " vs " +
                         std::to_string(n) + " columns");
  }
  Tensor out = xv;
  auto bd = b.value().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += bd[j];
  return Variable::from_op(std::move(out), {x, b}, [x, b, m, n](const Tensor& g) {
    accumulate_grad(x, g);
    if (b.requires_grad()) {
      Tensor gb(b.value().shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g.at(i, j);
      accumulate_grad(b, gb);
    }
  });
}

Variable matmul(const Variable& a, const Variable& b) {
  require_matrix(a.value(), "matmul");
  require_matrix(b.value(), "matmul");
  Tensor out = matmul_raw(a.value(), false, b.value(), false);
  return Variable::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) accumulate_grad(a, matmul_raw(g, false, b.value(), true));
    if (b.requires_grad()) accumulate_grad(b, matmul_raw(a.value(), true, g, false));
  });
}

Variable transpose(const Variable& a) {
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
  return Variable::from_op(std::move(out), {a}, [a, m, n](const Tensor& g) {
    Tensor ga(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) = g.at(j, i);
    accumulate_grad(a, ga);
  });
}

Variable reshape(const Variable& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return Variable::from_op(std::move(out), {a}, [a](const Tensor& g) {
    accumulate_grad(a, g.reshaped(a.value().shape()));
  });
}

Variable sigmoid(const Variable& a) {
  Tensor out = a.value();
  for (auto& x : out.data()) {
    x = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  Tensor y = out;
  return Variable::from_op(std::move(out), {a}, [a, y = std::move(y)](const Tensor& g) {
    Tensor ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i] * (1.0 - y[i]);
    accumulate_grad(a, ga);
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Variable gelu(const Variable& a) {
  Tensor out = a.value();
  for (auto& x : out.data()) {
    x = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  return Variable::from_op(std::move(out), {a}, [a](const Tensor& g) {
    Tensor ga = g;
    auto xd = a.value().data();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double x = xd[i];
      const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      ga[i] *= 0.5 * (1.0 + t) + 0.5 * x * dt;
    }
    accumulate_grad(a, ga);
  });
}

Variable softmax_rows(const Variable& a) {
  const Tensor& av = a.value();
  require_matrix(av, "softmax_rows");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  if (n == 0) throw DimensionError("softmax_rows: zero columns");
  Tensor out = av;
  for (std::size_t i = 0; i < m; ++i) {
    double mx = out.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, out.at(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      total += out.at(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= total;
  }
  Tensor y = out;
  return Variable::from_op(std::move(out), {a}, [a, y = std::move(y), m, n](const Tensor& g) {
    Tensor ga(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < n; ++j) inner += g.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) = y.at(i, j) * (g.at(i, j) - inner);
    }
    accumulate_grad(a, ga);
  });
}

Variable layer_norm_rows(const Variable& x, const Variable& gain,
                         const Variable& bias, double eps) {
  const Tensor& xv = x.value();
  require_matrix(xv, "layer_norm_rows");
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw DimensionError("layer_norm_rows: gain/bias length must equal " +
                         std::to_string(n));
  }
  Tensor xhat(Shape{m, n});
  std::vector<double> rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv.at(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = xv.at(i, j) - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat.at(i, j) = (xv.at(i, j) - mu) * rstd[i];
  }
  Tensor out(Shape{m, n});
  auto gd = gain.value().data();
  auto bd = bias.value().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = xhat.at(i, j) * gd[j] + bd[j];

  return Variable::from_op(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), m, n](const Tensor& g) {
        auto gd = gain.value().data();
        if (gain.requires_grad() || bias.requires_grad()) {
          Tensor ggain(gain.value().shape());
          Tensor gbias(bias.value().shape());
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              ggain[j] += g.at(i, j) * xhat.at(i, j);
              gbias[j] += g.at(i, j);
            }
          }
          accumulate_grad(gain, ggain);
          accumulate_grad(bias, gbias);
        }
        if (x.requires_grad()) {
          Tensor gx(Shape{m, n});
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g.at(i, j) * gd[j];
              mean_d += d;
              mean_dx += d * xhat.at(i, j);
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g.at(i, j) * gd[j];
              gx.at(i, j) = rstd[i] * (d - mean_d - xhat.at(i, j) * mean_dx);
            }
          }
          accumulate_grad(x, gx);
        }
      });
}

Variable mean_rows(const Variable& x) {
  const Tensor& xv = x.value();
  require_matrix(xv, "mean_rows");
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  if (m == 0 || n == 0) throw DimensionError("mean_rows: empty matrix");
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += xv.at(i, j);
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& v : out.data()) v *= inv;
  return Variable::from_op(std::move(out), {x}, [x, m, n, inv](const Tensor& g) {
    Tensor gx(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx.at(i, j) = g[j] * inv;
    accumulate_grad(x, gx);
  });
}

Variable sum(const Variable& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return Variable::from_op(Tensor::scalar(total), {a}, [a](const Tensor& g) {
    accumulate_grad(a, Tensor(a.value().shape(), g.item()));
  });
}

Variable dot(const Variable& a, const Variable& b) {
  require_same_shape(a.value(), b.value(), "dot");
  double total = 0.0;
  auto ad = a.value().data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < ad.size(); ++i) total += ad[i] * bd[i];
  return Variable::from_op(Tensor::scalar(total), {a, b}, [a, b](const Tensor& g) {
    const double s = g.item();
    if (a.requires_grad()) {
      Tensor ga = b.value();
      for (auto& v : ga.data()) v *= s;
      accumulate_grad(a, ga);
    }
    if (b.requires_grad()) {
      Tensor gb = a.value();
      for (auto& v : gb.data()) v *= s;
      accumulate_grad(b, gb);
    }
  });
}

Variable cosine_similarity(const Variable& u, const Variable& v) {
  const Tensor& uv = u.value();
  const Tensor& vv = v.value();
  if (uv.size() != vv.size()) {
    throw DimensionError("cosine_similarity: lengths " + std::to_string(uv.size()) +
                         " and " + std::to_string(vv.size()) + " differ");
  }
  if (uv.size() == 0) throw DimensionError("cosine_similarity: empty vectors");
  double uu = 0.0, vvn = 0.0, uvd = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    uu += uv[i] * uv[i];
    vvn += vv[i] * vv[i];
    uvd += uv[i] * vv[i];
  }
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vvn);
  const double denom = nu * nv + kCosineEps;
  const double c = uvd / denom;
  return Variable::from_op(
      Tensor::scalar(c), {u, v}, [u, v, nu, nv, denom, uvd](const Tensor& g) {
        const double s = g.item();
        const double k = uvd / (denom * denom);
        auto grad_for = [&](const Tensor& self, const Tensor& other, double nself,
                            double nother) {
          Tensor out(self.shape());
          // d‖self‖/dself is undefined at zero; its contribution is dropped.
          const double radial = nself > 0.0 ? k * nother / nself : 0.0;
          for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = s * (other[i] / denom - radial * self[i]);
          }
          return out;
        };
        if (u.requires_grad()) accumulate_grad(u, grad_for(u.value(), v.value(), nu, nv));
        if (v.requires_grad()) accumulate_grad(v, grad_for(v.value(), u.value(), nv, nu));
      });
}

Variable scaled_dot_attention(const Variable& q, const Variable& k,
                              const Variable& v) {
  require_matrix(q.value(), "scaled_dot_attention");
  require_matrix(k.value(), "scaled_dot_attention");
  require_matrix(v.value(), "scaled_dot_attention");
  if (q.value().cols() != k.value().cols()) {
    throw DimensionError("scaled_dot_attention: query width " +
                         std::to_string(q.value().cols()) + " vs key width " +
                         std::to_string(k.value().cols()));
  }
  if (k.value().rows() != v.value().rows()) {
    throw DimensionError("scaled_dot_attention: " + std::to_string(k.value().rows()) +
                         " keys but " + std::to_string(v.value().rows()) + " values");
  }
  if (k.value().rows() == 0) throw DimensionError("scaled_dot_attention: no keys");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
  Variable logits = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(softmax_rows(logits), v);
}

Variable stack_scalars(std::span<const Variable> scalars, std::size_t rows,
                       std::size_t cols) {
  if (scalars.size() != rows * cols) {
    throw DimensionError("stack_scalars: " + std::to_string(scalars.size()) +
                         " scalars for a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " matrix");
  }
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < scalars.size(); ++i) out[i] = scalars[i].item();
  std::vector<Variable> parents(scalars.begin(), scalars.end());
  auto captured = parents;
  return Variable::from_op(std::move(out), std::move(parents),
                           [captured = std::move(captured)](const Tensor& g) {
                             for (std::size_t i = 0; i < captured.size(); ++i) {
                               accumulate_grad(captured[i], Tensor::scalar(g[i]));
                             }
                           });
}

GradCheckResult gradient_check(const std::function<Variable()>& f,
                               std::span<const Variable> params,
                               const GradCheckOptions& options) {
  for (auto p : params) p.zero_grad();
  Variable y = f();
  if (y.value().size() != 1) throw DimensionError("gradient_check: f must be scalar");
  if (!std::isfinite(y.item())) throw NumericError("gradient_check: f is not finite");
  y.backward();

  NoGradGuard no_grad;
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (auto p : params) {
    const Tensor analytic = p.grad();
    Tensor& value = p.mutable_value();
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor > 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double original = value[i];
      value[i] = original + options.eps;
      const double plus = f().item();
      value[i] = original - options.eps;
      const double minus = f().item();
      value[i] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("gradient_check: f is not finite under perturbation");
      }
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.coords_checked;
    }
  }
  return result;
}

}  // namespace cir
