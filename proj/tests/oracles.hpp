#pragma once

// Deliberately naive reference implementations, written without reusing
// any library code, to cross-check the production metrics.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

// AP from the definition: for every relevant rank i, count relevant items
// in the prefix [1..i] from scratch.
inline double average_precision(const std::vector<int>& rel, int relevant_total) {
  double total = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    int hits = 0;
    for (std::size_t j = 0; j <= i; ++j) hits += rel[j];
    total += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return total / relevant_total;
}

inline int relevant_count(const std::vector<int>& rel) {
  int n = 0;
  for (int r : rel) n += r;
  return n;
}

inline int hit_within(const std::vector<int>& rel, std::size_t k) {
  for (std::size_t i = 0; i < rel.size() && i < k; ++i) {
    if (rel[i]) return 1;
  }
  return 0;
}

// Mean over queries that have at least one relevant item.
inline double mean_ap(const std::vector<std::vector<int>>& queries) {
  double total = 0.0;
  int used = 0;
  for (const auto& q : queries) {
    const int r = relevant_count(q);
    if (r == 0) continue;
    total += average_precision(q, r);
    ++used;
  }
  return total / used;
}

inline double accuracy_at(const std::vector<std::vector<int>>& queries, std::size_t k) {
  double total = 0.0;
  int used = 0;
  for (const auto& q : queries) {
    if (relevant_count(q) == 0) continue;
    total += hit_within(q, k);
    ++used;
  }
  return total / used;
}

inline double sample_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

// A random batch of relevance lists (length 1..50, density varies per
// list); at least one list has a relevant item.
inline std::vector<std::vector<int>> random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_queries(1, 8);
  std::uniform_int_distribution<int> length(1, 50);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  std::vector<std::vector<int>> out;
  while (true) {
    out.clear();
    const int q = n_queries(rng);
    for (int i = 0; i < q; ++i) {
      const int n = length(rng);
      const double p = density(rng);
      std::bernoulli_distribution coin(p);
      std::vector<int> rel(static_cast<std::size_t>(n));
      for (auto& r : rel) r = coin(rng) ? 1 : 0;
      out.push_back(std::move(rel));
    }
    for (const auto& rel : out) {
      if (relevant_count(rel) > 0) return out;
    }
  }
}

}  // namespace oracle
