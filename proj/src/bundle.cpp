#include "cir/bundle.hpp"

#include <set>
#include <unordered_set>

#include <json.hpp>

#include "cir/error.hpp"
#include "container.hpp"

namespace cir {

namespace {

using nlohmann::json;

constexpr std::string_view kBundleMagic = "CIRB";

bool finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

json dims_to_json(const ModelDims& dims) {
  json levels = json::object();
  for (Level level : kLevels) {
    const auto& d = dims.at(level);
    levels[level_name(level)] = {d.h, d.w, d.d};
  }
  return levels;
}

ModelDims dims_from_json(const json& levels, std::size_t text_dim) {
  ModelDims dims;
  dims.text_dim = text_dim;
  for (Level level : kLevels) {
    const auto& arr = levels.at(level_name(level));
    if (!arr.is_array() || arr.size() != 3) {
      throw FormatError(std::string("level ") + level_name(level) + " must list [h, w, d]");
    }
    dims.levels[index_of(level)] = {arr[0].get<std::size_t>(), arr[1].get<std::size_t>(),
                                    arr[2].get<std::size_t>()};
  }
  return dims;
}

}  // namespace

void FeatureBundle::validate() const {
  if (format_version != kBundleVersion) {
    throw VersionError("bundle version " + std::to_string(format_version) +
                       " is not supported");
  }
  for (Level level : kLevels) {
    const auto& d = dims.at(level);
    if (d.h == 0 || d.w == 0 || d.d == 0) {
      throw FormatError(std::string("bundle: level ") + level_name(level) +
                        " has an empty dimension (" + to_string(d) + ")");
    }
  }
  if (dims.text_dim == 0) throw FormatError("bundle: text_dim must be positive");
  if (class_names.empty()) throw FormatError("bundle: no class names");
  const std::set<std::string> classes(class_names.begin(), class_names.end());
  if (classes.size() != class_names.size()) throw FormatError("bundle: duplicate class names");

  auto check_features = [&](const MultiLevelFeatures& f, const std::string& owner) {
    for (Level level : kLevels) {
      const auto& map = f[index_of(level)];
      if (map.dims() != dims.at(level)) {
        throw FormatError(owner + ": level " + level_name(level) + " is " +
                          to_string(map.dims()) + ", bundle declares " +
                          to_string(dims.at(level)));
      }
      if (!finite(map.data())) throw FormatError(owner + ": non-finite feature value");
    }
  };

  std::unordered_set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second) throw FormatError("bundle: duplicate entry id '" + e.id + "'");
    if (!classes.count(e.label)) {
      throw FormatError("bundle: entry '" + e.id + "' has unknown label '" + e.label + "'");
    }
    check_features(e.features, "entry '" + e.id + "'");
  }
  ids.clear();
  for (const auto& q : queries) {
    if (!ids.insert(q.id).second) throw FormatError("bundle: duplicate query id '" + q.id + "'");
    if (!classes.count(q.label)) {
      throw FormatError("bundle: query '" + q.id + "' has unknown label '" + q.label + "'");
    }
    check_features(q.image_features, "query '" + q.id + "'");
    if (q.text.tokens() == 0) throw FormatError("query '" + q.id + "' has no text tokens");
    if (q.text.dim() != dims.text_dim) {
      throw FormatError("query '" + q.id + "': token width " + std::to_string(q.text.dim()) +
                        ", bundle declares " + std::to_string(dims.text_dim));
    }
    if (!finite(q.text.data())) throw FormatError("query '" + q.id + "': non-finite token value");
  }
}

void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path) {
  bundle.validate();
  json header;
  header["levels"] = dims_to_json(bundle.dims);
  header["text_dim"] = bundle.dims.text_dim;
  header["class_names"] = bundle.class_names;
  header["provenance"] = bundle.provenance;
  header["entries"] = json::array();
  header["queries"] = json::array();

  std::vector<double> payload;
  for (const auto& e : bundle.entries) {
    header["entries"].push_back({{"id", e.id}, {"label", e.label}});
    for (const auto& map : e.features) {
      payload.insert(payload.end(), map.data().begin(), map.data().end());
    }
  }
  for (const auto& q : bundle.queries) {
    header["queries"].push_back({{"id", q.id}, {"label", q.label}, {"tokens", q.text.tokens()}});
    for (const auto& map : q.image_features) {
      payload.insert(payload.end(), map.data().begin(), map.data().end());
    }
    payload.insert(payload.end(), q.text.data().begin(), q.text.data().end());
  }
  detail::write_container(path, kBundleMagic, kBundleVersion, header.dump(), payload);
}

FeatureBundle load_bundle(const std::filesystem::path& path) {
  auto raw = detail::read_container(path, kBundleMagic, kBundleVersion, "bundle");

  json header;
  try {
    header = json::parse(raw.header);
  } catch (const json::exception& e) {
    throw FormatError("bundle '" + path.string() + "': malformed metadata header: " + e.what());
  }

  FeatureBundle b;
  struct PendingQuery {
    std::string id;
    std::string label;
    std::size_t tokens;
  };
  std::vector<std::pair<std::string, std::string>> entry_meta;
  std::vector<PendingQuery> query_meta;
  try {
    b.dims = dims_from_json(header.at("levels"), header.at("text_dim").get<std::size_t>());
    b.class_names = header.at("class_names").get<std::vector<std::string>>();
    b.provenance = header.value("provenance", std::string{});
    for (const auto& e : header.at("entries")) {
      entry_meta.emplace_back(e.at("id").get<std::string>(), e.at("label").get<std::string>());
    }
    for (const auto& q : header.at("queries")) {
      query_meta.push_back({q.at("id").get<std::string>(), q.at("label").get<std::string>(),
                            q.at("tokens").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("bundle '" + path.string() + "': invalid metadata: " + e.what());
  }

  detail::PayloadReader reader(raw.payload);
  auto read_levels = [&](const std::string& owner) {
    MultiLevelFeatures f;
    for (Level level : kLevels) {
      FeatureMap map(b.dims.at(level));
      if (!reader.read(map.data())) {
        throw CorruptionError("bundle '" + path.string() + "': payload truncated in " + owner +
                              " (level " + level_name(level) + ", declared " +
                              to_string(b.dims.at(level)) + ")");
      }
      if (!finite(map.data())) {
        throw CorruptionError("bundle '" + path.string() + "': non-finite values in " + owner);
      }
      f[index_of(level)] = std::move(map);
    }
    return f;
  };

  for (auto& [id, label] : entry_meta) {
    DatabaseEntry e;
    e.features = read_levels("entry '" + id + "'");
    e.id = std::move(id);
    e.label = std::move(label);
    b.entries.push_back(std::move(e));
  }
  for (auto& meta : query_meta) {
    const std::string owner = "query '" + meta.id + "'";
    QueryRecord q;
    q.image_features = read_levels(owner);
    std::vector<double> tokens(meta.tokens * b.dims.text_dim);
    if (!reader.read(tokens)) {
      throw CorruptionError("bundle '" + path.string() + "': payload truncated in " + owner +
                            " (text tokens)");
    }
    q.text = TokenEmbeddings(meta.tokens, b.dims.text_dim, std::move(tokens));
    q.id = std::move(meta.id);
    q.label = std::move(meta.label);
    b.queries.push_back(std::move(q));
  }
  if (!reader.exhausted()) {
    throw CorruptionError("bundle '" + path.string() + "': trailing bytes after payload");
  }
  b.validate();
  return b;
}

}  // namespace cir
