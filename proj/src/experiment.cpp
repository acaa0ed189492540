#include "cir/experiment.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/sha.h>
#include <spdlog/spdlog.h>

#include "cir/checkpoint.hpp"
#include "cir/error.hpp"
#include "cir/ranked_io.hpp"

namespace cir {

namespace {
using nlohmann::json;

json summary_json(const MetricSummary& s) {
  json j;
  j["map"] = s.map;
  for (std::size_t i = 0; i < s.cutoffs.size(); ++i) {
    j[fmt::format("acc@{}", s.cutoffs[i])] = s.accuracy[i];
  }
  j["queries_used"] = s.queries_used;
  j["queries_skipped"] = s.queries_skipped;
  return j;
}

json stat_json(const AggregateStat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

std::string sha256_hex(const std::string& text) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::string hex;
  for (unsigned char byte : digest) hex += fmt::format("{:02x}", byte);
  return hex;
}

}  // namespace

void ExperimentConfig::validate(bool require_bundle_file) const {
  train.validate();
  if (k == 0) throw ConfigError("k must be positive");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (cutoffs.empty()) throw ConfigError("at least one Acc@K cutoff is required");
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] == 0 || (i > 0 && cutoffs[i] <= cutoffs[i - 1])) {
      throw ConfigError("cutoffs must be positive and strictly ascending");
    }
  }
  if (require_bundle_file && !std::filesystem::is_regular_file(bundle_path)) {
    throw ConfigError("bundle '" + bundle_path.string() + "' does not exist");
  }
}

FoldSeeds fold_seeds(std::uint64_t seed, std::size_t fold) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fold)};
  std::uint32_t words[4];
  seq.generate(std::begin(words), std::end(words));
  return {(std::uint64_t{words[0]} << 32) | words[1], (std::uint64_t{words[2]} << 32) | words[3]};
}

AggregateStat aggregate(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("aggregate: no values");
  double total = 0.0;
  for (double v : values) total += v;
  const double mean = total / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

MetricSummary evaluate(const Model& model, std::span<const QueryRecord* const> queries,
                       const Database& candidates, FusionWeight w, bool exclude_self,
                       std::span<const std::size_t> cutoffs, std::vector<RankedList>* ranked) {
  CandidateIndex index(candidates, model);
  std::vector<RelevanceVector> rels;
  rels.reserve(queries.size());
  for (const auto* q : queries) {
    RankedList list = rank(*q, index, model, w, exclude_self);
    rels.push_back(relevance_of(list));
    if (ranked) ranked->push_back(std::move(list));
  }
  return summarize(rels, cutoffs);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate(true);
  return run_experiment(cfg, load_bundle(cfg.bundle_path));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const FeatureBundle& bundle) {
  cfg.validate(false);
  bundle.validate();
  const auto items = split_items(bundle);
  const auto splits = stratified_kfold(items, cfg.folds, cfg.seed, cfg.train.validation_fraction);

  ExperimentReport report;
  report.cutoffs = cfg.cutoffs;
  for (const auto& split : splits) {
    const std::size_t f = split.fold_index;
    try {
      const FoldSeeds seeds = fold_seeds(cfg.seed, f);
      Model initial = Model::initialize({bundle.dims, cfg.k, seeds.model});
      FoldData data = partition_fold(bundle, split);

      FoldReport fr;
      fr.fold = f;
      fr.test_queries = data.test_queries.size();
      fr.untrained = evaluate(initial, data.test_queries, data.candidates, cfg.train.beta,
                              cfg.train.exclude_self, cfg.cutoffs);

      TrainConfig tc = cfg.train;
      tc.seed = seeds.train;
      TrainResult trained = train_fold(bundle, split, tc, initial.clone());
      fr.best_epoch = trained.best_epoch;
      fr.epochs_run = trained.log.empty() ? 0 : trained.log.back().epoch;
      fr.log = std::move(trained.log);
      fr.trained = evaluate(trained.model, data.test_queries, data.candidates, cfg.train.beta,
                            cfg.train.exclude_self, cfg.cutoffs, &fr.ranked);
      spdlog::info("fold {}: mAP {:.4f} (untrained {:.4f}), best epoch {} of {}", f + 1,
                   fr.trained.map, fr.untrained.map, fr.best_epoch, fr.epochs_run);

      if (!cfg.output_dir.empty()) {
        const auto dir = cfg.output_dir / fmt::format("fold_{}", f + 1);
        std::filesystem::create_directories(dir);
        write_text_file(dir / "train_log.jsonl", format_train_log(fr.log));
        std::ostringstream tsv;
        write_ranked_tsv(tsv, fr.ranked);
        write_text_file(dir / "ranked.tsv", tsv.str());
        save_checkpoint(trained.model, cfg.train.beta, dir / "checkpoint.circ");
      }
      report.folds.push_back(std::move(fr));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("fold {}: {}", f + 1, e.what()));
    }
  }

  auto collect = [&](auto field) {
    std::vector<double> values;
    for (const auto& fr : report.folds) values.push_back(field(fr));
    return aggregate(values);
  };
  report.map = collect([](const FoldReport& fr) { return fr.trained.map; });
  report.untrained_map = collect([](const FoldReport& fr) { return fr.untrained.map; });
  for (std::size_t i = 0; i < cfg.cutoffs.size(); ++i) {
    report.accuracy.push_back(collect([i](const FoldReport& fr) { return fr.trained.accuracy[i]; }));
    report.untrained_accuracy.push_back(
        collect([i](const FoldReport& fr) { return fr.untrained.accuracy[i]; }));
  }

  if (!cfg.output_dir.empty()) {
    write_text_file(cfg.output_dir / "report.txt", format_report_table(report));
    write_text_file(cfg.output_dir / "report.jsonl", format_report_records(report));
  }
  return report;
}

std::string format_report_table(const ExperimentReport& report) {
  std::string out = fmt::format("{:<10}{:>8}{:>6}{:>16}", "fold", "queries", "best", "mAP");
  for (auto k : report.cutoffs) out += fmt::format("{:>16}", fmt::format("Acc@{}", k));
  out += fmt::format("{:>16}\n", "untrained mAP");
  for (const auto& fr : report.folds) {
    out += fmt::format("{:<10}{:>8}{:>6}{:>16.2f}", fr.fold + 1, fr.test_queries, fr.best_epoch,
                       100.0 * fr.trained.map);
    for (double a : fr.trained.accuracy) out += fmt::format("{:>16.2f}", 100.0 * a);
    out += fmt::format("{:>16.2f}\n", 100.0 * fr.untrained.map);
  }
  auto cell = [](const AggregateStat& s) {
    return fmt::format("{:>16}", fmt::format("{:.2f} ± {:.2f}", 100.0 * s.mean, 100.0 * s.std));
  };
  out += fmt::format("{:<10}{:>8}{:>6}", "mean±std", "", "") + cell(report.map);
  for (const auto& a : report.accuracy) out += cell(a);
  out += cell(report.untrained_map) + "\n";
  return out;
}

std::string format_report_records(const ExperimentReport& report) {
  std::string out;
  for (const auto& fr : report.folds) {
    json j;
    j["fold"] = fr.fold + 1;
    j["test_queries"] = fr.test_queries;
    j["best_epoch"] = fr.best_epoch;
    j["epochs_run"] = fr.epochs_run;
    j["trained"] = summary_json(fr.trained);
    j["untrained"] = summary_json(fr.untrained);
    out += j.dump() + "\n";
  }
  json agg;
  agg["aggregate"]["map"] = stat_json(report.map);
  agg["aggregate"]["untrained_map"] = stat_json(report.untrained_map);
  for (std::size_t i = 0; i < report.cutoffs.size(); ++i) {
    agg["aggregate"][fmt::format("acc@{}", report.cutoffs[i])] = stat_json(report.accuracy[i]);
    agg["aggregate"][fmt::format("untrained_acc@{}", report.cutoffs[i])] =
        stat_json(report.untrained_accuracy[i]);
  }
  agg["folds"] = report.folds.size();
  out += agg.dump() + "\n";
  return out;
}

std::string format_train_log(std::span<const EpochRecord> log) {
  std::string out;
  for (const auto& r : log) {
    json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = std::isfinite(r.train_loss) ? json(r.train_loss) : json(nullptr);
    j["validation_map"] = std::isfinite(r.validation_map) ? json(r.validation_map) : json(nullptr);
    j["best"] = r.best;
    out += j.dump() + "\n";
  }
  return out;
}

std::string make_manifest(const std::string& command, const std::string& config_text,
                          std::uint64_t seed, const std::string& bundle_provenance) {
  json j;
  j["command"] = command;
  j["config"] = config_text;
  j["config_sha256"] = sha256_hex(config_text);
  j["seed"] = seed;
  j["bundle_format_version"] = kBundleVersion;
  j["checkpoint_format_version"] = kCheckpointVersion;
  j["bundle_provenance"] = bundle_provenance;
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out.flush()) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string describe(const ExperimentConfig& cfg) {
  std::string cutoffs;
  for (std::size_t i = 0; i < cfg.cutoffs.size(); ++i) {
    cutoffs += (i ? ", " : "") + std::to_string(cfg.cutoffs[i]);
  }
  const auto& t = cfg.train;
  return fmt::format(
      "bundle = \"{}\"\n"
      "seed = {}\n"
      "folds = {}\n"
      "k = {}\n"
      "beta = {:.17g}\n"
      "cutoffs = [{}]\n"
      "exclude_self = {}\n"
      "mask_same_label = {}\n"
      "lr = {:.17g}\n"
      "weight_decay = {:.17g}\n"
      "max_epochs = {}\n"
      "patience = {}\n"
      "batch_size = {}\n"
      "temperature = {:.17g}\n"
      "validation_fraction = {:.17g}\n",
      cfg.bundle_path.string(), cfg.seed, cfg.folds, cfg.k, t.beta.beta(), cutoffs,
      t.exclude_self, t.mask_same_label, t.learning_rate, t.weight_decay, t.max_epochs,
      t.patience, t.batch_size, t.temperature, t.validation_fraction);
}

}  // namespace cir
