#pragma once

// Feature bundle: multi-level image features, labels, ids and query token
// embeddings at rest. Written by the synthetic generator or by an external
// extractor, read by every command of the engine.
//
// On disk: "CIRB" | version u32 | header length u64 | JSON metadata |
// little-endian f64 payload. The payload holds, in order, every entry's
// L, M, H maps and then every query's L, M, H maps followed by its tokens.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cir/features.hpp"
#include "cir/retrieval.hpp"

namespace cir {

inline constexpr std::uint32_t kBundleVersion = 1;

struct FeatureBundle {
  std::uint32_t format_version = kBundleVersion;
  ModelDims dims{};
  std::vector<std::string> class_names;
  std::vector<DatabaseEntry> entries;
  std::vector<QueryRecord> queries;
  std::string provenance;

  /// Throws FormatError on any violated invariant (dims, unique ids, known
  /// labels, at least one token per query, finite values).
  void validate() const;

  Database database() const { return Database(entries); }
};

void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path);
FeatureBundle load_bundle(const std::filesystem::path& path);

}  // namespace cir
