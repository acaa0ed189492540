#pragma once

// Training of the composer and region-mask parameters: batch-softmax
// contrastive loss over in-batch negatives, Adam with decoupled weight
// decay, early stopping on validation mAP, stratified k-fold splits.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cir/alignment.hpp"
#include "cir/bundle.hpp"
#include "cir/model.hpp"

namespace cir {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;
  std::size_t max_epochs = 100;
  std::size_t patience = 30;
  std::size_t batch_size = 16;
  double temperature = 0.1;
  std::uint64_t seed = 0;
  FusionWeight beta{kDefaultBeta};
  double validation_fraction = 0.15;
  bool exclude_self = true;
  /// Drop same-label batch members other than the row's own positive from
  /// the softmax instead of treating them as negatives.
  bool mask_same_label = true;

  /// Throws ConfigError on non-positive rates, sizes or temperature.
  void validate() const;
};

/// Mean over rows of −log softmax(sims / temperature)[positive]. Cells
/// flagged in `excluded` (row-major, same shape as sims) are left out of the
/// softmax; the trainer uses this for same-label targets other than the
/// row's own positive.
Variable contrastive_loss(const Variable& sims, std::span<const std::size_t> positive_index,
                          double temperature, std::span<const std::uint8_t> excluded = {});

struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// Bias-corrected Adam followed by decoupled decay:
/// θ ← θ − lr·m̂/(√v̂ + eps) − lr·wd·θ. Updates parameter values in place.
void adam_step(std::span<const NamedParameter> params, std::span<const Tensor> grads,
               AdamState& state, const TrainConfig& cfg);

struct LabeledItem {
  std::string id;
  std::string label;
  /// Items sharing a stratum are spread evenly across folds within each
  /// label (used to balance query-only, entry-only and shared ids).
  int stratum = 0;
};

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;

  friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

/// Deterministic for a seed. Per-label counts per test fold differ by at
/// most one and the test folds partition the items. The validation ids are
/// an evenly spread `validation_fraction` of each label's training portion.
std::vector<FoldSplit> stratified_kfold(std::span<const LabeledItem> items, std::size_t k,
                                        std::uint64_t seed, double validation_fraction = 0.15);

/// Patience-based stopping on a metric where larger is better.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one epoch; true when it strictly improves on the best so far.
  bool observe(std::size_t epoch, double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double validation_map = 0.0;
  bool best = false;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_validation_map = 0.0;
};

/// Which bundle records a fold uses for each role.
struct FoldData {
  std::vector<const QueryRecord*> train_queries;
  std::vector<const QueryRecord*> validation_queries;
  std::vector<const QueryRecord*> test_queries;
  std::vector<const DatabaseEntry*> train_entries;
  /// Candidates for validation and test ranking: entries in the training
  /// portion (train ∪ validation ids).
  Database candidates;
};

FoldData partition_fold(const FeatureBundle& bundle, const FoldSplit& fold);

/// Items for stratified splitting: every distinct id of the bundle, with
/// stratum 0 for query-only, 1 for ids present as both, 2 for entry-only.
std::vector<LabeledItem> split_items(const FeatureBundle& bundle);

/// Mean AP of `queries` ranked against `candidates`.
double evaluate_map(const Model& model, std::span<const QueryRecord* const> queries,
                    const Database& candidates, FusionWeight w, bool exclude_self);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains `model` on one fold and returns the checkpoint with the best
/// validation mAP (epoch 0, the starting point, included).
TrainResult train_fold(const FeatureBundle& bundle, const FoldSplit& fold,
                       const TrainConfig& cfg, Model model,
                       const EpochCallback& on_epoch = {});

}  // namespace cir
