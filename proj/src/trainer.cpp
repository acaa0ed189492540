#include "cir/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "cir/error.hpp"
#include "cir/metrics.hpp"

namespace cir {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

Variable contrastive_loss(const Variable& sims, std::span<const std::size_t> positive_index,
                          double temperature, std::span<const std::uint8_t> excluded) {
  if (!(temperature > 0.0)) throw ArgumentError("contrastive_loss: temperature must be > 0");
  const Tensor& s = sims.value();
  if (s.rank() != 2 || s.rows() == 0 || s.cols() == 0) {
    throw DimensionError("contrastive_loss: sims must be a non-empty matrix, got " +
                         shape_string(s.shape()));
  }
  const std::size_t rows = s.rows();
  const std::size_t cols = s.cols();
  if (positive_index.size() != rows) {
    throw ArgumentError("contrastive_loss: " + std::to_string(positive_index.size()) +
                        " positive indices for " + std::to_string(rows) + " rows");
  }
  for (std::size_t p : positive_index) {
    if (p >= cols) {
      throw ArgumentError("contrastive_loss: positive index " + std::to_string(p) +
                          " out of range for " + std::to_string(cols) + " candidates");
    }
  }
  if (!excluded.empty() && excluded.size() != rows * cols) {
    throw ArgumentError("contrastive_loss: exclusion mask has " +
                        std::to_string(excluded.size()) + " cells, expected " +
                        std::to_string(rows * cols));
  }
  auto skip = [&](std::size_t i, std::size_t j) {
    return !excluded.empty() && excluded[i * cols + j] != 0;
  };
  for (std::size_t i = 0; i < rows; ++i) {
    if (skip(i, positive_index[i])) {
      throw ArgumentError("contrastive_loss: positive of row " + std::to_string(i) +
                          " is excluded");
    }
  }

  Tensor probs(Shape{rows, cols});
  double loss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = s.at(i, positive_index[i]) / temperature;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!skip(i, j)) mx = std::max(mx, s.at(i, j) / temperature);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      probs.at(i, j) = skip(i, j) ? 0.0 : std::exp(s.at(i, j) / temperature - mx);
      total += probs.at(i, j);
    }
    for (std::size_t j = 0; j < cols; ++j) probs.at(i, j) /= total;
    const double log_norm = mx + std::log(total);
    loss += log_norm - s.at(i, positive_index[i]) / temperature;
  }
  loss /= static_cast<double>(rows);

  std::vector<std::size_t> positives(positive_index.begin(), positive_index.end());
  return Variable::from_op(
      Tensor::scalar(loss), {sims},
      [sims, probs = std::move(probs), positives = std::move(positives), temperature, rows,
       cols](const Tensor& g) {
        const double factor = g.item() / (temperature * static_cast<double>(rows));
        Tensor gs(Shape{rows, cols});
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            const double target = j == positives[i] ? 1.0 : 0.0;
            gs.at(i, j) = factor * (probs.at(i, j) - target);
          }
        }
        accumulate_grad(sims, gs);
      });
}

void adam_step(std::span<const NamedParameter> params, std::span<const Tensor> grads,
               AdamState& state, const TrainConfig& cfg) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].value.shape();
    if (grads[i].shape() != shape || state.m[i].shape() != shape ||
        state.v[i].shape() != shape) {
      throw DimensionError("adam_step: shape mismatch for " + params[i].name);
    }
    if (!grads[i].all_finite()) {
      throw NumericError("adam_step: non-finite gradient for " + params[i].name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bias2 = 1.0 - std::pow(kAdamBeta2, t);
  const double decay = cfg.learning_rate * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Variable handle = params[i].value;
    Tensor& theta = handle.mutable_value();
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
      v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      const double old = theta[j];
      theta[j] = old - cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + kAdamEps)) -
                 decay * old;
    }
  }
}

std::vector<FoldSplit> stratified_kfold(std::span<const LabeledItem> items, std::size_t k,
                                        std::uint64_t seed, double validation_fraction) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be at least 2");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("stratified_kfold: validation fraction must lie in [0, 1)");
  }
  std::unordered_set<std::string> seen;
  std::map<std::string, std::vector<LabeledItem>> by_label;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) {
      throw ConfigError("stratified_kfold: duplicate id '" + item.id + "'");
    }
    by_label[item.label].push_back(item);
  }
  if (by_label.empty()) throw ConfigError("stratified_kfold: no items");

  std::mt19937_64 rng(seed);
  std::vector<const LabeledItem*> order;
  for (auto& [label, group] : by_label) {
    if (group.size() < k) {
      throw ConfigError("stratified_kfold: class '" + label + "' has " +
                        std::to_string(group.size()) + " items, fewer than k=" +
                        std::to_string(k));
    }
    std::shuffle(group.begin(), group.end(), rng);
    std::stable_sort(group.begin(), group.end(),
                     [](const LabeledItem& a, const LabeledItem& b) {
                       return a.stratum < b.stratum;
                     });
    for (const auto& item : group) order.push_back(&item);
  }

  // Round-robin over the label-grouped order: each label occupies a
  // contiguous run, so its per-fold counts differ by at most one.
  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) folds[f].fold_index = f;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    folds[pos % k].test_ids.push_back(order[pos]->id);
  }
  for (std::size_t f = 0; f < k; ++f) {
    std::map<std::string, std::size_t> seen_in_label;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (pos % k == f) continue;
      const auto* item = order[pos];
      const std::size_t i = seen_in_label[item->label]++;
      const auto before = static_cast<std::size_t>(std::floor(static_cast<double>(i) * validation_fraction));
      const auto after = static_cast<std::size_t>(std::floor(static_cast<double>(i + 1) * validation_fraction));
      if (after > before) {
        folds[f].validation_ids.push_back(item->id);
      } else {
        folds[f].train_ids.push_back(item->id);
      }
    }
  }
  return folds;
}

bool EarlyStopping::observe(std::size_t epoch, double metric) {
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

std::vector<LabeledItem> split_items(const FeatureBundle& bundle) {
  struct Seen {
    std::string label;
    bool entry = false;
    bool query = false;
  };
  std::vector<std::string> ids;
  std::unordered_map<std::string, Seen> seen;
  auto note = [&](const std::string& id, const std::string& label, bool is_entry) {
    auto [it, inserted] = seen.try_emplace(id, Seen{label});
    if (inserted) ids.push_back(id);
    if (it->second.label != label) {
      throw ConfigError("id '" + id + "' carries labels '" + it->second.label + "' and '" +
                        label + "'");
    }
    (is_entry ? it->second.entry : it->second.query) = true;
  };
  for (const auto& e : bundle.entries) note(e.id, e.label, true);
  for (const auto& q : bundle.queries) note(q.id, q.label, false);

  std::vector<LabeledItem> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto& s = seen.at(id);
    const int stratum = s.query && s.entry ? 1 : (s.query ? 0 : 2);
    out.push_back({id, s.label, stratum});
  }
  return out;
}

FoldData partition_fold(const FeatureBundle& bundle, const FoldSplit& fold) {
  enum class Role { train, validation, test };
  std::unordered_map<std::string, Role> role;
  for (const auto& id : fold.train_ids) role.emplace(id, Role::train);
  for (const auto& id : fold.validation_ids) role.emplace(id, Role::validation);
  for (const auto& id : fold.test_ids) role.emplace(id, Role::test);
  auto role_of = [&](const std::string& id) {
    auto it = role.find(id);
    if (it == role.end()) {
      throw ConfigError("fold " + std::to_string(fold.fold_index) + " does not assign id '" +
                        id + "'");
    }
    return it->second;
  };

  FoldData data;
  for (const auto& q : bundle.queries) {
    switch (role_of(q.id)) {
      case Role::train: data.train_queries.push_back(&q); break;
      case Role::validation: data.validation_queries.push_back(&q); break;
      case Role::test: data.test_queries.push_back(&q); break;
    }
  }
  for (const auto& e : bundle.entries) {
    const Role r = role_of(e.id);
    if (r == Role::train) data.train_entries.push_back(&e);
    if (r != Role::test) data.candidates.add(e);
  }
  return data;
}

double evaluate_map(const Model& model, std::span<const QueryRecord* const> queries,
                    const Database& candidates, FusionWeight w, bool exclude_self) {
  CandidateIndex index(candidates, model);
  std::vector<RelevanceVector> rels;
  rels.reserve(queries.size());
  for (const auto* q : queries) {
    rels.push_back(relevance_of(rank(*q, index, model, w, exclude_self)));
  }
  return mean_ap(rels);
}

TrainResult train_fold(const FeatureBundle& bundle, const FoldSplit& fold,
                       const TrainConfig& cfg, Model model, const EpochCallback& on_epoch) {
  cfg.validate();
  FoldData data = partition_fold(bundle, fold);
  if (data.train_queries.empty()) {
    throw ConfigError("fold " + std::to_string(fold.fold_index) + ": empty train split");
  }
  std::map<std::string, std::vector<const DatabaseEntry*>> positives;
  for (const auto* e : data.train_entries) positives[e->label].push_back(e);

  std::vector<const QueryRecord*> train_queries;
  for (const auto* q : data.train_queries) {
    const auto it = positives.find(q->label);
    const bool has_positive =
        it != positives.end() &&
        std::any_of(it->second.begin(), it->second.end(),
                    [&](const DatabaseEntry* e) { return e->id != q->id; });
    if (has_positive) {
      train_queries.push_back(q);
    } else {
      spdlog::warn("fold {}: query '{}' has no training positive, skipped", fold.fold_index,
                   q->id);
    }
  }
  if (train_queries.empty()) {
    throw ConfigError("fold " + std::to_string(fold.fold_index) +
                      ": no training query has a same-label training entry");
  }
  const bool has_validation = !data.validation_queries.empty();
  if (!has_validation) {
    spdlog::warn("fold {}: no validation queries; the last epoch is returned",
                 fold.fold_index);
  }

  auto validation_map = [&]() {
    if (!has_validation) return std::nan("");
    return evaluate_map(model, data.validation_queries, data.candidates, cfg.beta,
                        cfg.exclude_self);
  };

  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  std::vector<Tensor> best = model.snapshot();
  auto finish_epoch = [&](EpochRecord record) {
    const double tracked =
        has_validation ? record.validation_map : static_cast<double>(record.epoch);
    record.best = stopper.observe(record.epoch, tracked);
    if (record.best) best = model.snapshot();
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  };

  finish_epoch({0, std::nan(""), validation_map(), false});

  const auto params = model.parameters();
  AdamState adam;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_queries.size());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t rows = end - start;

      std::vector<AlignmentView> query_views;
      std::vector<AlignmentView> target_views;
      for (std::size_t r = start; r < end; ++r) {
        const QueryRecord& q = *train_queries[order[r]];
        const auto& pool = positives.at(q.label);
        const DatabaseEntry* target = nullptr;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        do {
          target = pool[pick(rng)];
        } while (target->id == q.id);

        query_views.push_back(alignment_view(
            model, compose_query(model, as_variables(q.image_features), q.text.as_variable())));
        target_views.push_back(alignment_view(model, as_variables(target->features)));
      }

      std::vector<Variable> sims;
      sims.reserve(rows * rows);
      for (std::size_t b = 0; b < rows; ++b) {
        for (std::size_t c = 0; c < rows; ++c) {
          sims.push_back(score_views(query_views[b], target_views[c], cfg.beta).fused);
        }
      }
      std::vector<std::size_t> diagonal(rows);
      std::iota(diagonal.begin(), diagonal.end(), std::size_t{0});
      // Same-label targets of other rows are relevant, not negatives.
      std::vector<std::uint8_t> same_label(rows * rows, 0);
      for (std::size_t b = 0; b < rows; ++b) {
        for (std::size_t c = 0; c < rows; ++c) {
          same_label[b * rows + c] =
              cfg.mask_same_label && b != c && train_queries[order[start + b]]->label ==
                            train_queries[order[start + c]]->label;
        }
      }
      Variable loss = contrastive_loss(stack_scalars(sims, rows, rows), diagonal,
                                       cfg.temperature, same_label);
      if (!std::isfinite(loss.item())) {
        throw NumericError("fold " + std::to_string(fold.fold_index) + " epoch " +
                           std::to_string(epoch) + ": non-finite training loss");
      }

      for (auto p : params) p.value.zero_grad();
      loss.backward();
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (const auto& p : params) grads.push_back(p.value.grad());
      adam_step(params, grads, adam, cfg);

      loss_total += loss.item();
      ++batches;
    }

    finish_epoch({epoch, loss_total / static_cast<double>(batches), validation_map(), false});
    if (stopper.should_stop()) break;
  }

  model.restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_validation_map = has_validation ? stopper.best() : std::nan("");
  result.model = std::move(model);
  return result;
}

}  // namespace cir
