#include "pvg/net/checkpoint.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "pvg/core/pvgt.hpp"

namespace pvg {

namespace {
constexpr const char* kManifest = "manifest.json";
constexpr const char* kFormat = "pvg-checkpoint";
}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const PvgNet<float>& model, const nlohmann::json& run) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = 1;
  manifest["config"] = model.config();
  nlohmann::json entries = nlohmann::json::array();
  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string file = params.name(i) + ".pvgt";
    write_pvgt(dir / file, params[i]);
    entries.push_back({{"name", params.name(i)}, {"file", file}, {"shape", params[i].shape()}});
  }
  manifest["parameters"] = std::move(entries);
  manifest["run"] = run;
  std::ofstream os(dir / kManifest);
  if (!os) throw IoError("cannot write " + (dir / kManifest).string());
  os << manifest.dump(2) << '\n';
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / kManifest);
  if (!is) throw CheckpointError("no manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("unreadable manifest: ") + e.what());
  }
  if (!manifest.is_object() || manifest.value("format", std::string()) != kFormat)
    throw CheckpointError("manifest format is not " + std::string(kFormat));
  return manifest;
}

PvgNet<float> load_checkpoint(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_checkpoint_manifest(dir);
  ModelConfig config;
  try {
    if (!manifest.contains("config")) throw ConfigError("missing");
    config = manifest.at("config").get<ModelConfig>();
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("manifest config: ") + e.what());
  }
  PvgNet<float> model(config);
  auto& params = model.params();
  std::set<std::string> seen;
  if (!manifest.contains("parameters") || !manifest["parameters"].is_array())
    throw CheckpointError("manifest has no parameter list");
  for (const auto& entry : manifest.at("parameters")) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("file") || !entry["name"].is_string() ||
        !entry["file"].is_string())
      throw CheckpointError("malformed manifest parameter entry");
    const std::string name = entry.at("name").get<std::string>();
    if (!params.contains(name)) throw CheckpointError("manifest names unknown parameter " + name);
    if (!seen.insert(name).second) throw CheckpointError("manifest repeats parameter " + name);
    Tensor<float> value;
    try {
      value = read_pvgt(dir / entry.at("file").get<std::string>());
    } catch (const Error& e) {
      throw CheckpointError("parameter " + name + ": " + e.what());
    }
    Tensor<float>& slot = params.at(name);
    if (value.shape() != slot.shape())
      throw CheckpointError("parameter " + name + " has shape " + shape_str(value.shape()) + ", config expects " +
                            shape_str(slot.shape()));
    slot = std::move(value);
  }
  if (seen.size() != params.size()) throw CheckpointError("manifest is missing parameters");
  return model;
}

}  // namespace pvg
