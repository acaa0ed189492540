// Command-line front end: synth, train, cv, rank, metrics, gradcheck.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cir/bundle.hpp"
#include "cir/checkpoint.hpp"
#include "cir/error.hpp"
#include "cir/experiment.hpp"
#include "cir/gradcheck.hpp"
#include "cir/ranked_io.hpp"
#include "cir/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cir;

namespace {

LevelDims parse_level_dims(const std::string& text) {
  LevelDims d;
  char x1 = 0;
  char x2 = 0;
  std::istringstream in(text);
  if (!(in >> d.h >> x1 >> d.w >> x2 >> d.d) || x1 != 'x' || x2 != 'x' || !in.eof()) {
    throw ArgumentError("level dims must look like HxWxD, got '" + text + "'");
  }
  return d;
}

struct DimsFlags {
  std::string low = "8x8x16";
  std::string mid = "4x4x32";
  std::string high = "2x2x64";
  std::size_t text_dim = 16;

  void add(CLI::App* app) {
    app->add_option("--dims-l", low, "Low-level grid HxWxD")->capture_default_str();
    app->add_option("--dims-m", mid, "Mid-level grid HxWxD")->capture_default_str();
    app->add_option("--dims-h", high, "High-level grid HxWxD")->capture_default_str();
    app->add_option("--text-dim", text_dim, "Token embedding width")->capture_default_str();
  }

  ModelDims parse() const {
    ModelDims dims;
    dims.levels = {parse_level_dims(low), parse_level_dims(mid), parse_level_dims(high)};
    dims.text_dim = text_dim;
    return dims;
  }
};

// Flags shared by train and cv; names match the keys of describe().
struct ExperimentFlags {
  ExperimentConfig cfg;
  double beta = kDefaultBeta;
  bool include_self = false;
  bool plain_negatives = false;

  void add(CLI::App* app) {
    auto& t = cfg.train;
    app->add_option("--bundle", cfg.bundle_path, "Feature bundle")->required();
    app->add_option("--out", cfg.output_dir, "Output directory")->required();
    app->add_option("--seed", cfg.seed, "Split, initialization and sampling seed")
        ->capture_default_str();
    app->add_option("--folds", cfg.folds, "Number of folds")->capture_default_str();
    app->add_option("--k", cfg.k, "Region masks per level")->capture_default_str();
    app->add_option("--beta", beta, "Local/global fusion weight")->capture_default_str();
    app->add_option("--cutoffs", cfg.cutoffs, "Acc@K cutoffs")->capture_default_str();
    app->add_flag("--include-self", include_self,
                  "Keep a candidate whose id equals the query id");
    app->add_flag("--plain-negatives", plain_negatives,
                  "Treat same-label batch members as negatives");
    app->add_option("--lr", t.learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--weight-decay", t.weight_decay, "Decoupled weight decay")
        ->capture_default_str();
    app->add_option("--max-epochs", t.max_epochs)->capture_default_str();
    app->add_option("--patience", t.patience, "Epochs without validation gain before stopping")
        ->capture_default_str();
    app->add_option("--batch-size", t.batch_size)->capture_default_str();
    app->add_option("--temperature", t.temperature, "Contrastive softmax temperature")
        ->capture_default_str();
    app->add_option("--validation-fraction", t.validation_fraction)->capture_default_str();
  }

  const ExperimentConfig& finish() {
    // Absolute so the written config.toml works from any directory.
    cfg.bundle_path = fs::absolute(cfg.bundle_path);
    cfg.train.beta = FusionWeight(beta);
    cfg.train.exclude_self = !include_self;
    cfg.train.mask_same_label = !plain_negatives;
    cfg.validate(true);
    return cfg;
  }
};

// describe() uses plain keys; the CLI flags use dashes.
std::string config_file_text(const std::string& command, const ExperimentConfig& cfg) {
  std::string text = describe(cfg);
  std::string out = "[" + command + "]\n";
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    std::string key = line.substr(0, eq);
    for (auto& ch : key) {
      if (ch == '_') ch = '-';
    }
    const bool value = line.substr(eq + 3) == "true";
    if (key == "exclude-self") {
      out += fmt::format("include-self = {}\n", !value);
      continue;
    }
    if (key == "mask-same-label") {
      out += fmt::format("plain-negatives = {}\n", !value);
      continue;
    }
    out += key + line.substr(eq) + "\n";
  }
  return out;
}

void write_run_files(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
                     const std::string& provenance) {
  fs::create_directories(dir);
  const std::string config = config_file_text(command, cfg);
  write_text_file(dir / "config.toml", config);
  write_text_file(dir / "manifest.json", make_manifest(command, config, cfg.seed, provenance));
}

int run_synth(const fs::path& out, const SyntheticSpec& spec, bool local_cue,
              const LocalCueSpec& cue_spec) {
  const FeatureBundle bundle = local_cue ? generate_local_cue(cue_spec) : generate_synthetic(spec);
  save_bundle(bundle, out);
  auto manifest = out;
  manifest += ".manifest.json";
  write_text_file(manifest, make_manifest("synth", bundle.provenance,
                                          local_cue ? cue_spec.seed : spec.seed,
                                          bundle.provenance));
  spdlog::info("wrote {} entries and {} queries to {}", bundle.entries.size(),
               bundle.queries.size(), out.string());
  return kExitOk;
}

int run_train(ExperimentFlags& flags, std::size_t fold) {
  const ExperimentConfig& cfg = flags.finish();
  const FeatureBundle bundle = load_bundle(cfg.bundle_path);
  if (fold == 0 || fold > cfg.folds) {
    throw ConfigError(fmt::format("--fold must lie in 1..{}", cfg.folds));
  }
  write_run_files(cfg.output_dir, "train", cfg, bundle.provenance);

  const auto splits =
      stratified_kfold(split_items(bundle), cfg.folds, cfg.seed, cfg.train.validation_fraction);
  const auto& split = splits[fold - 1];
  const FoldSeeds seeds = fold_seeds(cfg.seed, split.fold_index);
  TrainConfig tc = cfg.train;
  tc.seed = seeds.train;
  const Model initial = Model::initialize({bundle.dims, cfg.k, seeds.model});
  TrainResult result = train_fold(bundle, split, tc, initial.clone(), [](const EpochRecord& r) {
    spdlog::info("epoch {:>4}  loss {:>10.6f}  val mAP {:.4f}{}", r.epoch, r.train_loss,
                 r.validation_map, r.best ? "  *" : "");
  });

  FoldData data = partition_fold(bundle, split);
  std::vector<RankedList> ranked;
  const MetricSummary untrained = evaluate(initial, data.test_queries, data.candidates,
                                           cfg.train.beta, cfg.train.exclude_self, cfg.cutoffs);
  const MetricSummary trained =
      evaluate(result.model, data.test_queries, data.candidates, cfg.train.beta,
               cfg.train.exclude_self, cfg.cutoffs, &ranked);

  write_text_file(cfg.output_dir / "train_log.jsonl", format_train_log(result.log));
  std::ostringstream tsv;
  write_ranked_tsv(tsv, ranked);
  write_text_file(cfg.output_dir / "ranked.tsv", tsv.str());
  save_checkpoint(result.model, cfg.train.beta, cfg.output_dir / "checkpoint.circ");

  std::string line = fmt::format("fold {}: mAP {:.4f} (untrained {:.4f})", fold, trained.map,
                                 untrained.map);
  for (std::size_t i = 0; i < trained.cutoffs.size(); ++i) {
    line += fmt::format("  Acc@{} {:.4f}", trained.cutoffs[i], trained.accuracy[i]);
  }
  std::cout << line << "\n";
  return kExitOk;
}

int run_cv(ExperimentFlags& flags) {
  const ExperimentConfig& cfg = flags.finish();
  const FeatureBundle bundle = load_bundle(cfg.bundle_path);
  write_run_files(cfg.output_dir, "cv", cfg, bundle.provenance);
  const ExperimentReport report = run_experiment(cfg, bundle);
  std::cout << format_report_table(report);
  return kExitOk;
}

int run_rank(const fs::path& checkpoint_path, const fs::path& bundle_path,
             const std::vector<std::string>& query_ids, const fs::path& out, std::size_t top,
             bool include_self) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const FeatureBundle bundle = load_bundle(bundle_path);
  if (!(ckpt.model.config().dims == bundle.dims)) {
    throw ConfigError("checkpoint dims do not match the bundle dims");
  }
  const Database db = bundle.database();
  const CandidateIndex index(db, ckpt.model);

  std::vector<const QueryRecord*> selected;
  if (query_ids.empty()) {
    for (const auto& q : bundle.queries) selected.push_back(&q);
  } else {
    for (const auto& id : query_ids) {
      const auto it = std::find_if(bundle.queries.begin(), bundle.queries.end(),
                                   [&](const QueryRecord& q) { return q.id == id; });
      if (it == bundle.queries.end()) throw ArgumentError("unknown query id '" + id + "'");
      selected.push_back(&*it);
    }
  }
  std::vector<RankedList> lists;
  for (const auto* q : selected) {
    RankedList list = rank(*q, index, ckpt.model, ckpt.weight, !include_self);
    lists.push_back(top > 0 ? top_k(list, top) : std::move(list));
  }

  if (out.empty()) {
    write_ranked_tsv(std::cout, lists);
  } else {
    std::ostringstream tsv;
    write_ranked_tsv(tsv, lists);
    write_text_file(out, tsv.str());
    auto manifest = out;
    manifest += ".manifest.json";
    const std::string config = fmt::format(
        "[rank]\ncheckpoint = \"{}\"\nbundle = \"{}\"\ntop = {}\ninclude-self = {}\n",
        checkpoint_path.string(), bundle_path.string(), top, include_self);
    write_text_file(manifest,
                    make_manifest("rank", config, ckpt.model.config().seed, bundle.provenance));
  }
  return kExitOk;
}

int run_metrics(const std::vector<fs::path>& files, const std::vector<std::size_t>& cutoffs,
                bool as_json) {
  std::vector<RelevanceVector> all;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    for (auto& q : read_ranked_tsv(in, path.string())) all.push_back(std::move(q.relevance));
  }
  const MetricSummary s = summarize(all, cutoffs);
  if (as_json) {
    nlohmann::json j;
    j["map"] = s.map;
    for (std::size_t i = 0; i < s.cutoffs.size(); ++i) {
      j[fmt::format("acc@{}", s.cutoffs[i])] = s.accuracy[i];
    }
    j["queries_used"] = s.queries_used;
    j["queries_skipped"] = s.queries_skipped;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << fmt::format("queries {} (skipped {})\nmAP     {:.6f}\n", s.queries_used,
                             s.queries_skipped, s.map);
    for (std::size_t i = 0; i < s.cutoffs.size(); ++i) {
      std::cout << fmt::format("Acc@{:<3} {:.6f}\n", s.cutoffs[i], s.accuracy[i]);
    }
  }
  return kExitOk;
}

int run_gradcheck(const GradCheckSuiteOptions& options, double tolerance) {
  double worst = 0.0;
  double total_seconds = 0.0;
  for (const auto& c : run_gradcheck_suite(options)) {
    std::cout << fmt::format("{:<24} max_rel_error {:.3e}  coords {:>6}  {:.2f}s\n", c.name,
                             c.max_rel_error, c.coords_checked, c.seconds);
    worst = std::max(worst, c.max_rel_error);
    total_seconds += c.seconds;
  }
  std::cout << fmt::format("worst {:.3e} (tolerance {:.0e}), {:.2f}s total\n", worst, tolerance,
                           total_seconds);
  return worst < tolerance ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image retrieval engine"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with [subcommand] sections");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature bundle");
  fs::path synth_out;
  SyntheticSpec spec;
  LocalCueSpec cue_spec;
  DimsFlags synth_dims;
  bool local_cue = false;
  synth->add_option("--out", synth_out, "Bundle path")->required();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--classes", spec.classes)->capture_default_str();
  synth->add_option("--entries-per-class", spec.entries_per_class)->capture_default_str();
  synth->add_option("--queries-per-class", spec.queries_per_class)->capture_default_str();
  synth->add_option("--tokens", spec.text_tokens, "Tokens per query text")
      ->capture_default_str();
  synth->add_option("--noise", spec.noise, "Gaussian noise std")->capture_default_str();
  synth->add_option("--signal", spec.signal, "Prototype norm per position")
      ->capture_default_str();
  synth->add_flag("--local-cue", local_cue,
                  "Class identity only in one quadrant, matched global statistics");
  synth->add_option("--cue", cue_spec.cue, "Local-cue strength")->capture_default_str();
  synth->add_option("--marker", cue_spec.marker, "Local-cue quadrant marker")
      ->capture_default_str();
  synth_dims.add(synth);

  // train / cv
  auto* train = app.add_subcommand("train", "Train and evaluate one fold");
  ExperimentFlags train_flags;
  std::size_t fold = 1;
  train_flags.add(train);
  train->add_option("--fold", fold, "Fold to run, 1-based")->capture_default_str();

  auto* cv = app.add_subcommand("cv", "Cross-validated experiment");
  ExperimentFlags cv_flags;
  cv_flags.add(cv);

  // rank
  auto* rank_cmd = app.add_subcommand("rank", "Rank bundle queries with a checkpoint");
  fs::path rank_ckpt;
  fs::path rank_bundle;
  fs::path rank_out;
  std::vector<std::string> rank_queries;
  std::size_t rank_top = 0;
  bool rank_include_self = false;
  rank_cmd->add_option("--checkpoint", rank_ckpt)->required()->check(CLI::ExistingFile);
  rank_cmd->add_option("--bundle", rank_bundle)->required()->check(CLI::ExistingFile);
  rank_cmd->add_option("--query", rank_queries, "Query id; repeat for several (default all)");
  rank_cmd->add_option("--out", rank_out, "TSV path (default stdout)");
  rank_cmd->add_option("--top", rank_top, "Keep the top K candidates (0 keeps all)")
      ->capture_default_str();
  rank_cmd->add_flag("--include-self", rank_include_self);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from ranked-list files");
  std::vector<fs::path> metric_files;
  std::vector<std::size_t> metric_cutoffs = kDefaultCutoffs;
  bool metrics_json = false;
  metrics->add_option("files", metric_files, "Ranked-list TSV files")
      ->required()
      ->check(CLI::ExistingFile);
  metrics->add_option("--cutoffs", metric_cutoffs)->capture_default_str();
  metrics->add_flag("--json", metrics_json, "Print one JSON record");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  GradCheckSuiteOptions gc;
  DimsFlags gc_dims;
  double gc_tolerance = 1e-4;
  gradcheck->add_option("--seed", gc.seed)->capture_default_str();
  gradcheck->add_option("--k", gc.k)->capture_default_str();
  gradcheck->add_option("--eps", gc.eps)->capture_default_str();
  gradcheck->add_option("--max-coords", gc.max_coords_per_tensor,
                        "Coordinates probed per tensor (0 = all)")
      ->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tolerance)->capture_default_str();
  gc_dims.add(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*synth) {
      const ModelDims dims = synth_dims.parse();
      spec.dims = dims;
      cue_spec.seed = spec.seed;
      cue_spec.classes = spec.classes;
      cue_spec.entries_per_class = spec.entries_per_class;
      cue_spec.queries_per_class = spec.queries_per_class;
      cue_spec.text_tokens = spec.text_tokens;
      cue_spec.noise = spec.noise;
      cue_spec.dims = dims;
      return run_synth(synth_out, spec, local_cue, cue_spec);
    }
    if (*train) return run_train(train_flags, fold);
    if (*cv) return run_cv(cv_flags);
    if (*rank_cmd) {
      return run_rank(rank_ckpt, rank_bundle, rank_queries, rank_out, rank_top,
                      rank_include_self);
    }
    if (*metrics) return run_metrics(metric_files, metric_cutoffs, metrics_json);
    if (*gradcheck) {
      gc.dims = gc_dims.parse();
      return run_gradcheck(gc, gc_tolerance);
    }
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("i/o error: {}", e.what());
    return kExitData;
  }
  return kExitOk;
}
