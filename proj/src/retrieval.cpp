#include "cir/retrieval.hpp"

#include <algorithm>

#include "cir/error.hpp"

namespace cir {

Database::Database(std::vector<DatabaseEntry> entries) {
  entries_.reserve(entries.size());
  for (auto& e : entries) add(std::move(e));
}

void Database::add(DatabaseEntry entry) {
  if (index_.count(entry.id)) {
    throw ConfigError("database: duplicate id '" + entry.id + "'");
  }
  index_.emplace(entry.id, entries_.size());
  entries_.push_back(std::move(entry));
}

const DatabaseEntry* Database::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::set<std::string> label_positives(const QueryRecord& q, const Database& db) {
  std::set<std::string> out;
  for (const auto& e : db.entries()) {
    if (e.label == q.label) out.insert(e.id);
  }
  return out;
}

namespace {

AlignmentView query_view(const QueryRecord& q, const Model& model) {
  check_dims(q.image_features, model.config().dims, "query '" + q.id + "'");
  if (q.text.dim() != model.config().dims.text_dim) {
    throw ConfigError("query '" + q.id + "': token width " + std::to_string(q.text.dim()) +
                      ", model expects " + std::to_string(model.config().dims.text_dim));
  }
  return alignment_view(model, compose_query(model, as_variables(q.image_features),
                                             q.text.as_variable()));
}

AlignmentView entry_view(const DatabaseEntry& e, const Model& model) {
  check_dims(e.features, model.config().dims, "entry '" + e.id + "'");
  return alignment_view(model, as_variables(e.features));
}

}  // namespace

ScoreResult score(const QueryRecord& q, const DatabaseEntry& e, const Model& model,
                  FusionWeight w) {
  NoGradGuard no_grad;
  try {
    auto terms = score_views(query_view(q, model), entry_view(e, model), w);
    return {terms.fused.item(), terms.local.item(), terms.global.item()};
  } catch (const DimensionError& err) {
    throw ConfigError(err.what());
  }
}

CandidateIndex::CandidateIndex(const Database& db, const Model& model) : db_(&db) {
  NoGradGuard no_grad;
  views_.reserve(db.size());
  for (const auto& e : db.entries()) {
    try {
      views_.push_back(entry_view(e, model));
    } catch (const DimensionError& err) {
      throw ConfigError(err.what());
    }
  }
}

void sort_ranked(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate_id < b.candidate_id;
  });
}

RankedList rank(const QueryRecord& q, const CandidateIndex& index, const Model& model,
                FusionWeight w, bool exclude_self) {
  const Database& db = index.database();
  if (db.empty()) throw EmptyDatabaseError("rank: database is empty");
  NoGradGuard no_grad;
  AlignmentView qv;
  try {
    qv = query_view(q, model);
  } catch (const DimensionError& err) {
    throw ConfigError(err.what());
  }

  RankedList out;
  out.query_id = q.id;
  out.query_label = q.label;
  out.entries.reserve(db.size());
  const auto& entries = db.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (exclude_self && entries[i].id == q.id) continue;
    auto terms = score_views(qv, index.view(i), w);
    out.entries.push_back({entries[i].id, entries[i].label, terms.fused.item(),
                           terms.local.item(), terms.global.item()});
  }
  sort_ranked(out.entries);
  return out;
}

RankedList rank(const QueryRecord& q, const Database& db, const Model& model,
                FusionWeight w, bool exclude_self) {
  if (db.empty()) throw EmptyDatabaseError("rank: database is empty");
  CandidateIndex index(db, model);
  return rank(q, index, model, w, exclude_self);
}

RankedList top_k(const RankedList& r, std::size_t k) {
  if (k == 0) throw ArgumentError("top_k: K must be at least 1");
  RankedList out;
  out.query_id = r.query_id;
  out.query_label = r.query_label;
  const std::size_t n = std::min(k, r.entries.size());
  out.entries.assign(r.entries.begin(), r.entries.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace cir
