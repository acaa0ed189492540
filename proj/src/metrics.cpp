#include "cir/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cir/error.hpp"

namespace cir {

RelevanceVector RelevanceVector::from_full_ranking(std::vector<std::uint8_t> rel) {
  RelevanceVector out;
  out.relevant_total = static_cast<std::size_t>(std::count(rel.begin(), rel.end(), 1));
  out.rel = std::move(rel);
  return out;
}

RelevanceVector relevance_of(const RankedList& list) {
  std::vector<std::uint8_t> rel;
  rel.reserve(list.entries.size());
  for (const auto& e : list.entries) rel.push_back(e.candidate_label == list.query_label);
  return RelevanceVector::from_full_ranking(std::move(rel));
}

double precision_at(std::size_t i, const RelevanceVector& rel) {
  if (i == 0 || i > rel.size()) {
    throw ArgumentError("precision_at: rank " + std::to_string(i) +
                        " outside 1.." + std::to_string(rel.size()));
  }
  const auto hits = std::accumulate(rel.rel.begin(), rel.rel.begin() + static_cast<std::ptrdiff_t>(i),
                                    std::size_t{0});
  return static_cast<double>(hits) / static_cast<double>(i);
}

double average_precision(const RelevanceVector& rel) {
  if (rel.relevant_total == 0) {
    throw UndefinedApError("average_precision: query has no relevant items");
  }
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel.rel[i]) {
      ++hits;
      total += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return total / static_cast<double>(rel.relevant_total);
}

namespace {

std::vector<const RelevanceVector*> usable(std::span<const RelevanceVector> queries,
                                           const char* what) {
  if (queries.empty()) throw ArgumentError(std::string(what) + ": no queries");
  std::vector<const RelevanceVector*> out;
  for (const auto& q : queries) {
    if (q.relevant_total > 0) out.push_back(&q);
  }
  if (out.size() < queries.size()) {
    spdlog::warn("{}: skipping {} of {} queries with no relevant items", what,
                 queries.size() - out.size(), queries.size());
  }
  if (out.empty()) {
    throw ArgumentError(std::string(what) + ": every query lacks relevant items");
  }
  return out;
}

}  // namespace

double mean_ap(std::span<const RelevanceVector> queries) {
  const auto qs = usable(queries, "mean_ap");
  double total = 0.0;
  for (const auto* q : qs) total += average_precision(*q);
  return total / static_cast<double>(qs.size());
}

int acc_at_k(const RelevanceVector& rel, std::size_t k) {
  if (k == 0) throw ArgumentError("acc_at_k: K must be at least 1");
  const std::size_t n = std::min(k, rel.size());
  return std::any_of(rel.rel.begin(), rel.rel.begin() + static_cast<std::ptrdiff_t>(n),
                     [](std::uint8_t r) { return r != 0; })
             ? 1
             : 0;
}

double accuracy_at_k(std::span<const RelevanceVector> queries, std::size_t k) {
  if (k == 0) throw ArgumentError("accuracy_at_k: K must be at least 1");
  const auto qs = usable(queries, "accuracy_at_k");
  double total = 0.0;
  for (const auto* q : qs) total += acc_at_k(*q, k);
  return total / static_cast<double>(qs.size());
}

MetricSummary summarize(std::span<const RelevanceVector> queries,
                        std::span<const std::size_t> cutoffs) {
  MetricSummary s;
  s.map = mean_ap(queries);
  s.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  for (std::size_t k : cutoffs) s.accuracy.push_back(accuracy_at_k(queries, k));
  s.queries_used = static_cast<std::size_t>(
      std::count_if(queries.begin(), queries.end(),
                    [](const RelevanceVector& q) { return q.relevant_total > 0; }));
  s.queries_skipped = queries.size() - s.queries_used;
  return s;
}

}  // namespace cir
