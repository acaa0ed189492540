#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cir/error.hpp"
#include "cir/tensor.hpp"

using namespace cir;

namespace {

Variable vec(std::vector<double> v, bool grad = false) {
  return Variable(Tensor::vector(std::move(v)), grad);
}

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(Shape{r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("cosine similarity hand values") {
  CHECK(cosine_similarity(vec({1, 2, 2}), vec({1, 2, 2})).item() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})).item() == 0.0);
  CHECK(cosine_similarity(vec({1, 2, 2}), vec({2, 1, 2})).item() ==
        doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(cosine_similarity(vec({0, 0}), vec({1, 1})).item() == 0.0);
}

TEST_CASE("cosine similarity is scale invariant and symmetric") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> u(7), v(7);
    for (auto& x : u) x = dist(rng);
    for (auto& x : v) x = dist(rng);
    const double a = scale(rng);
    std::vector<double> au(u);
    for (auto& x : au) x *= a;
    const double base = cosine_similarity(vec(u), vec(v)).item();
    CHECK(std::abs(cosine_similarity(vec(au), vec(v)).item() - base) < 1e-9);
    CHECK(std::abs(cosine_similarity(vec(v), vec(u)).item() - base) < 1e-15);
  }
}

TEST_CASE("cosine at a zero vector") {
  auto u = vec({0, 0}, true);
  auto v = vec({1, 1});
  auto c = cosine_similarity(u, v);
  CHECK(c.item() == 0.0);
  c.backward();
  // Only the linear term survives: v / eps.
  CHECK(u.grad()[0] == doctest::Approx(1.0 / kCosineEps).epsilon(1e-12));
  CHECK(u.grad()[1] == doctest::Approx(1.0 / kCosineEps).epsilon(1e-12));
}

TEST_CASE("mean over positions") {
  auto x = constant(Tensor::matrix(4, 1, {1, 2, 3, 4}));
  CHECK(mean_rows(x).value() == Tensor::vector({2.5}));
  CHECK(mean_rows(constant(Tensor(Shape{3, 2}))).value() == Tensor::vector({0.0, 0.0}));
  auto single = constant(Tensor::matrix(1, 3, {0.5, -1, 7}));
  CHECK(mean_rows(single).value() == Tensor::vector({0.5, -1, 7}));
}

TEST_CASE("attention hand example") {
  auto q = constant(Tensor::matrix(1, 2, {1, 0}));
  auto k = constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto v = constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const Tensor out = scaled_dot_attention(q, k, v).value();
  const double e = std::exp(1.0 / std::sqrt(2.0));
  CHECK(out.at(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
  CHECK(out.at(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
  CHECK(out.at(0, 0) == doctest::Approx(0.6698).epsilon(1e-4));
  CHECK(out.at(0, 1) == doctest::Approx(0.3302).epsilon(1e-4));
}

TEST_CASE("attention with one key returns that value row") {
  std::mt19937_64 rng(3);
  auto q = constant(random_matrix(5, 4, rng));
  auto k = constant(random_matrix(1, 4, rng));
  auto v = constant(random_matrix(1, 3, rng));
  const Tensor out = scaled_dot_attention(q, k, v).value();
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(out.at(r, c) == doctest::Approx(v.value().at(0, c)));
  }
}

TEST_CASE("attention with identical keys averages the values") {
  std::mt19937_64 rng(4);
  auto q = constant(random_matrix(3, 4, rng));
  Tensor keys(Shape{5, 4});
  const Tensor row = random_matrix(1, 4, rng);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) keys.at(r, c) = row.at(0, c);
  }
  auto v = constant(random_matrix(5, 2, rng));
  const Tensor out = scaled_dot_attention(q, constant(keys), v).value();
  const Tensor mean = mean_rows(v).value();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(out.at(r, c) == doctest::Approx(mean[c]).epsilon(1e-12));
  }
}

TEST_CASE("attention rows are convex combinations of value rows") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto q = constant(random_matrix(4, 3, rng));
    auto k = constant(random_matrix(6, 3, rng));
    auto v = constant(random_matrix(6, 2, rng));
    const Tensor out = scaled_dot_attention(q, k, v).value();
    for (std::size_t c = 0; c < 2; ++c) {
      double lo = v.value().at(0, c), hi = lo;
      for (std::size_t r = 1; r < 6; ++r) {
        lo = std::min(lo, v.value().at(r, c));
        hi = std::max(hi, v.value().at(r, c));
      }
      for (std::size_t r = 0; r < 4; ++r) {
        CHECK(out.at(r, c) >= lo - 1e-12);
        CHECK(out.at(r, c) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("attention rejects mismatched key and value counts") {
  auto q = constant(Tensor(Shape{1, 2}));
  auto k = constant(Tensor(Shape{2, 2}));
  auto v = constant(Tensor(Shape{3, 2}));
  CHECK_THROWS_AS(scaled_dot_attention(q, k, v), DimensionError);
}

TEST_CASE("gradient check on closed forms") {
  auto x = Variable(Tensor::scalar(3.0), true);
  auto square = gradient_check([&] { return mul(x, x); }, std::span<const Variable>(&x, 1));
  CHECK(square.max_rel_error < 1e-9);
  x.zero_grad();
  mul(x, x).backward();
  CHECK(x.grad().item() == doctest::Approx(6.0).epsilon(1e-15));

  auto y = Variable(Tensor::scalar(-1.5), true);
  auto linear = gradient_check([&] { return scale(y, 4.25); }, std::span<const Variable>(&y, 1));
  CHECK(linear.max_rel_error < 1e-9);

  auto u = vec({1, 2, 2}, true);
  auto v = vec({0.3, -1.0, 2.0});
  auto cos = gradient_check([&] { return cosine_similarity(u, v); },
                            std::span<const Variable>(&u, 1));
  CHECK(cos.max_rel_error < 1e-6);
  CHECK(cos.coords_checked == 3);
}

TEST_CASE("gradient check flags a wrong backward") {
  auto x = Variable(Tensor::scalar(2.0), true);
  auto wrong = [&] {
    const double v = x.value().item();
    return Variable::from_op(Tensor::scalar(v * v), {x}, [x](const Tensor& g) {
      accumulate_grad(x, Tensor::scalar(g.item() * 3.0));  // should be 2x = 4
    });
  };
  CHECK(gradient_check(wrong, std::span<const Variable>(&x, 1)).max_rel_error > 0.1);
}

TEST_CASE("gradients of single ops") {
  std::mt19937_64 rng(8);
  auto a = Variable(random_matrix(3, 4, rng), true);
  auto b = Variable(random_matrix(4, 2, rng), true);
  auto gain = Variable(random_matrix(1, 4, rng).reshaped({4}), true);
  auto bias = Variable(random_matrix(1, 4, rng).reshaped({4}), true);
  const Tensor w = random_matrix(3, 4, rng);
  auto probe = [&](const Variable& out) { return sum(mul(out, constant(w))); };
  const std::vector<Variable> ab{a, b};
  CHECK(gradient_check([&] { return sum(matmul(a, b)); }, ab).max_rel_error < 1e-7);
  const std::vector<Variable> all{a, gain, bias};
  CHECK(gradient_check([&] { return probe(layer_norm_rows(a, gain, bias)); }, all).max_rel_error <
        1e-7);
  CHECK(gradient_check([&] { return probe(gelu(a)); }, ab).max_rel_error < 1e-7);
  CHECK(gradient_check([&] { return probe(softmax_rows(a)); }, ab).max_rel_error < 1e-7);
  CHECK(gradient_check([&] { return probe(sigmoid(a)); }, ab).max_rel_error < 1e-7);
}

TEST_CASE("no graph under NoGradGuard") {
  auto a = Variable(Tensor::vector({1, 2}), true);
  NoGradGuard guard;
  CHECK_FALSE(grad_enabled());
  auto y = mul(a, a);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("gradient check rejects non-finite objectives") {
  auto x = Variable(Tensor::scalar(1.0), true);
  auto f = [&] { return scale(x, std::nan("")); };
  CHECK_THROWS_AS(gradient_check(f, std::span<const Variable>(&x, 1)), NumericError);
}
