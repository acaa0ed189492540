#include "cir/checkpoint.hpp"

#include <json.hpp>

#include "cir/error.hpp"
#include "container.hpp"

namespace cir {

namespace {
using nlohmann::json;
constexpr std::string_view kCheckpointMagic = "CIRC";
}  // namespace

void save_checkpoint(const Model& model, FusionWeight weight,
                     const std::filesystem::path& path) {
  const auto& cfg = model.config();
  json header;
  for (Level level : kLevels) {
    const auto& d = cfg.dims.at(level);
    header["levels"][level_name(level)] = {d.h, d.w, d.d};
  }
  header["text_dim"] = cfg.dims.text_dim;
  header["k"] = cfg.k;
  header["seed"] = cfg.seed;
  header["beta"] = weight.beta();
  header["parameters"] = json::array();
  std::vector<double> payload;
  for (const auto& p : model.parameters()) {
    header["parameters"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
    const auto values = p.value.value().data();
    payload.insert(payload.end(), values.begin(), values.end());
  }
  detail::write_container(path, kCheckpointMagic, kCheckpointVersion, header.dump(), payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto raw = detail::read_container(path, kCheckpointMagic, kCheckpointVersion, "checkpoint");
  json header;
  ModelConfig cfg;
  double beta = 0.0;
  std::vector<std::pair<std::string, Shape>> declared;
  try {
    header = json::parse(raw.header);
    for (Level level : kLevels) {
      const auto dims = header.at("levels").at(level_name(level)).get<std::vector<std::size_t>>();
      if (dims.size() != 3) throw FormatError("checkpoint: level dims must be [h, w, d]");
      cfg.dims.levels[index_of(level)] = {dims[0], dims[1], dims[2]};
    }
    cfg.dims.text_dim = header.at("text_dim").get<std::size_t>();
    cfg.k = header.at("k").get<std::size_t>();
    cfg.seed = header.at("seed").get<std::uint64_t>();
    beta = header.at("beta").get<double>();
    for (const auto& p : header.at("parameters")) {
      declared.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
    }
  } catch (const json::exception& e) {
    throw FormatError("checkpoint '" + path.string() + "': invalid metadata: " + e.what());
  }

  Model model = [&] {
    try {
      return Model::initialize(cfg);
    } catch (const ConfigError& e) {
      throw FormatError("checkpoint '" + path.string() + "': " + e.what());
    }
  }();
  auto params = model.parameters();
  if (declared.size() != params.size()) {
    throw FormatError("checkpoint '" + path.string() + "': declares " +
                      std::to_string(declared.size()) + " parameter blocks, model has " +
                      std::to_string(params.size()));
  }
  detail::PayloadReader reader(raw.payload);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (declared[i].first != params[i].name || declared[i].second != params[i].value.shape()) {
      throw FormatError("checkpoint '" + path.string() + "': block " + std::to_string(i) +
                        " is " + declared[i].first + shape_string(declared[i].second) +
                        ", expected " + params[i].name + shape_string(params[i].value.shape()));
    }
    Tensor& value = params[i].value.mutable_value();
    if (!reader.read(value.data())) {
      throw CorruptionError("checkpoint '" + path.string() + "': payload truncated in " +
                            params[i].name);
    }
    if (!value.all_finite()) {
      throw CorruptionError("checkpoint '" + path.string() + "': non-finite values in " +
                            params[i].name);
    }
  }
  if (!reader.exhausted()) {
    throw CorruptionError("checkpoint '" + path.string() + "': trailing bytes after payload");
  }
  try {
    return {std::move(model), FusionWeight(beta)};
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace cir
