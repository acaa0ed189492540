#pragma once

// Cross-validated experiments: per fold train, rank the held-out queries,
// score them, and aggregate mean ± sample standard deviation over folds.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cir/bundle.hpp"
#include "cir/metrics.hpp"
#include "cir/trainer.hpp"

namespace cir {

struct ExperimentConfig {
  std::filesystem::path bundle_path;
  TrainConfig train;  // carries beta
  std::size_t k = kDefaultRegionCount;
  std::vector<std::size_t> cutoffs = kDefaultCutoffs;
  std::size_t folds = 5;
  /// Empty: nothing is written.
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  /// Throws ConfigError. `require_bundle_file` also checks the bundle path.
  void validate(bool require_bundle_file = true) const;
};

/// Seeds derived from the experiment seed, one set per fold.
struct FoldSeeds {
  std::uint64_t model = 0;
  std::uint64_t train = 0;
};
FoldSeeds fold_seeds(std::uint64_t seed, std::size_t fold);

struct FoldReport {
  std::size_t fold = 0;
  std::size_t test_queries = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  MetricSummary untrained;
  MetricSummary trained;
  std::vector<EpochRecord> log;
  std::vector<RankedList> ranked;  // trained model, test queries
};

struct AggregateStat {
  double mean = 0.0;
  double std = 0.0;  // sample (n − 1); 0 for a single value
};

AggregateStat aggregate(std::span<const double> values);

struct ExperimentReport {
  std::vector<std::size_t> cutoffs;
  std::vector<FoldReport> folds;
  AggregateStat map;
  std::vector<AggregateStat> accuracy;
  AggregateStat untrained_map;
  std::vector<AggregateStat> untrained_accuracy;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const FeatureBundle& bundle);

/// Ranks `queries` against `candidates` and summarizes the lists.
MetricSummary evaluate(const Model& model, std::span<const QueryRecord* const> queries,
                       const Database& candidates, FusionWeight w, bool exclude_self,
                       std::span<const std::size_t> cutoffs,
                       std::vector<RankedList>* ranked = nullptr);

/// Percent table mirroring "mean ± std" result tables.
std::string format_report_table(const ExperimentReport& report);
/// One JSON object per fold, then one aggregate object.
std::string format_report_records(const ExperimentReport& report);

std::string format_train_log(std::span<const EpochRecord> log);

/// Manifest describing a run: config, its SHA-256, seed and format versions.
std::string make_manifest(const std::string& command, const std::string& config_text,
                          std::uint64_t seed, const std::string& bundle_provenance);

/// Writes `text` to `path` through a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string describe(const ExperimentConfig& cfg);

}  // namespace cir
