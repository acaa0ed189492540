#include "cir/gradcheck.hpp"

#include <chrono>
#include <functional>
#include <numeric>
#include <random>

#include "cir/alignment.hpp"
#include "cir/composer.hpp"
#include "cir/model.hpp"
#include "cir/trainer.hpp"

namespace cir {

namespace {

Tensor random_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

void jitter(const std::vector<NamedParameter>& params, double stddev, std::mt19937_64& rng) {
  if (stddev == 0.0) return;
  std::normal_distribution<double> dist(0.0, stddev);
  for (const auto& p : params) {
    Variable handle = p.value;
    Tensor& t = handle.mutable_value();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += dist(rng);
  }
}

// Σ f ⊙ R for a fixed random R: touches every output coordinate.
Variable probe(const Variable& out, const Tensor& weights) {
  return sum(mul(out, constant(weights)));
}

class Runner {
 public:
  explicit Runner(const GradCheckSuiteOptions& o) : options_(o) {}

  void run(std::string name, const std::function<Variable()>& f,
           const std::vector<Variable>& params, bool subsample) {
    GradCheckOptions gc;
    gc.eps = options_.eps;
    gc.seed = options_.seed + cases_.size();
    gc.max_coords_per_tensor = subsample ? options_.max_coords_per_tensor : 0;
    const auto start = std::chrono::steady_clock::now();
    const auto r = gradient_check(f, params, gc);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    cases_.push_back({std::move(name), r.max_rel_error, r.coords_checked, elapsed.count()});
  }

  std::vector<GradCheckCase> take() { return std::move(cases_); }

 private:
  GradCheckSuiteOptions options_;
  std::vector<GradCheckCase> cases_;
};

std::vector<Variable> values_of(const std::vector<NamedParameter>& params) {
  std::vector<Variable> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

void op_cases(Runner& runner, std::mt19937_64& rng) {
  auto a = parameter(random_tensor({3, 4}, 1.0, rng));
  auto b = parameter(random_tensor({3, 4}, 1.0, rng));
  auto c = parameter(random_tensor({4, 5}, 1.0, rng));
  auto bias = parameter(random_tensor({4}, 1.0, rng));
  auto gain = parameter(random_tensor({4}, 1.0, rng));
  auto u = parameter(random_tensor({6}, 1.0, rng));
  auto v = parameter(random_tensor({6}, 1.0, rng));
  auto kk = parameter(random_tensor({5, 4}, 1.0, rng));
  auto vv = parameter(random_tensor({5, 3}, 1.0, rng));
  const Tensor r34 = random_tensor({3, 4}, 1.0, rng);
  const Tensor r35 = random_tensor({3, 5}, 1.0, rng);
  const Tensor r33 = random_tensor({3, 3}, 1.0, rng);
  const Tensor r4 = random_tensor({4}, 1.0, rng);

  runner.run("op.add_sub_mul", [&] { return probe(mul(add(a, b), sub(a, b)), r34); }, {a, b},
             false);
  runner.run("op.matmul", [&] { return probe(matmul(a, c), r35); }, {a, c}, false);
  runner.run("op.transpose", [&] { return probe(transpose(transpose(a)), r34); }, {a}, false);
  runner.run("op.add_row_bias", [&] { return probe(add_row_bias(a, bias), r34); }, {a, bias},
             false);
  runner.run("op.sigmoid", [&] { return probe(sigmoid(a), r34); }, {a}, false);
  runner.run("op.gelu", [&] { return probe(gelu(a), r34); }, {a}, false);
  runner.run("op.softmax_rows", [&] { return probe(softmax_rows(a), r34); }, {a}, false);
  runner.run("op.layer_norm_rows",
             [&] { return probe(layer_norm_rows(a, gain, bias), r34); }, {a, gain, bias}, false);
  runner.run("op.mean_rows", [&] { return probe(mean_rows(a), r4); }, {a}, false);
  runner.run("op.cosine_similarity", [&] { return cosine_similarity(u, v); }, {u, v}, false);
  runner.run("op.scaled_dot_attention",
             [&] { return probe(scaled_dot_attention(a, kk, vv), r33); }, {a, kk, vv}, false);
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  Runner runner(options);
  std::mt19937_64 rng(options.seed);
  op_cases(runner, rng);

  ModelConfig cfg{options.dims, options.k, options.seed};
  Model model = Model::initialize(cfg);
  jitter(model.parameters(), options.jitter, rng);
  const std::size_t text_dim = options.dims.text_dim;

  for (Level level : kLevels) {
    const auto& d = options.dims.at(level);
    const auto& block = model.block(level);
    auto x = parameter(random_tensor({d.positions(), d.d}, 1.0, rng));
    auto z = parameter(random_tensor({options.tokens, text_dim}, 1.0, rng));
    const Tensor weights = random_tensor({d.positions(), d.d}, 1.0, rng);
    auto params = values_of(block.parameters());
    params.push_back(x);
    params.push_back(z);
    runner.run(std::string("composer.") + level_name(level),
               [&] { return probe(compose(level, x, z, block), weights); }, params, true);
  }

  for (Level level : kLevels) {
    const auto& d = options.dims.at(level);
    const auto& gen = model.mask_generator(level);
    auto x = parameter(random_tensor({d.positions(), d.d}, 1.0, rng));
    auto y = parameter(random_tensor({d.positions(), d.d}, 1.0, rng));
    const Tensor weights = random_tensor({options.k, d.d}, 1.0, rng);
    auto params = values_of(gen.parameters());
    params.push_back(x);
    params.push_back(y);
    runner.run(std::string("alignment.") + level_name(level),
               [&] {
                 const auto qs = region_descriptors(level, x, gen);
                 const auto ts = region_descriptors(level, y, gen);
                 return add(cosine_similarity(aggregate_regions(qs), aggregate_regions(ts)),
                            probe(qs.descriptors, weights));
               },
               params, true);
  }

  // Full chain over a batch of queries and targets.
  std::vector<LevelVariables> images;
  std::vector<LevelVariables> targets;
  std::vector<Variable> tokens;
  for (std::size_t b = 0; b < options.batch; ++b) {
    LevelVariables img;
    LevelVariables tgt;
    for (Level level : kLevels) {
      const auto& d = options.dims.at(level);
      img[index_of(level)] = constant(random_tensor({d.positions(), d.d}, 1.0, rng));
      tgt[index_of(level)] = constant(random_tensor({d.positions(), d.d}, 1.0, rng));
    }
    images.push_back(img);
    targets.push_back(tgt);
    tokens.push_back(constant(random_tensor({options.tokens, text_dim}, 1.0, rng)));
  }
  const FusionWeight w(kDefaultBeta);
  std::vector<std::size_t> diagonal(options.batch);
  std::iota(diagonal.begin(), diagonal.end(), std::size_t{0});
  // One excluded off-diagonal cell exercises the masked softmax.
  std::vector<std::uint8_t> excluded(options.batch * options.batch, 0);
  if (options.batch > 1) excluded[1] = 1;
  runner.run("chain.contrastive",
             [&] {
               std::vector<AlignmentView> qv;
               std::vector<AlignmentView> tv;
               for (std::size_t b = 0; b < options.batch; ++b) {
                 qv.push_back(alignment_view(model, compose_query(model, images[b], tokens[b])));
                 tv.push_back(alignment_view(model, targets[b]));
               }
               std::vector<Variable> sims;
               for (std::size_t i = 0; i < options.batch; ++i) {
                 for (std::size_t j = 0; j < options.batch; ++j) {
                   sims.push_back(score_views(qv[i], tv[j], w).fused);
                 }
               }
               return contrastive_loss(stack_scalars(sims, options.batch, options.batch),
                                       diagonal, 0.1, excluded);
             },
             values_of(model.parameters()), true);

  return runner.take();
}

}  // namespace cir
