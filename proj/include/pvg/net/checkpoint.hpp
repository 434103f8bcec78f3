#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "pvg/net/pvg_net.hpp"

namespace pvg {

// A checkpoint directory holds one PVGT file per parameter plus
// manifest.json mapping parameter names to files and recording the config.
// `run` is stored verbatim under the manifest's "run" key.
void save_checkpoint(const std::filesystem::path& dir, const PvgNet<float>& model,
                     const nlohmann::json& run = nlohmann::json::object());

// Rebuilds the model from the manifest config and loads every parameter.
// Missing files, unknown or missing names, and shape disagreements raise
// CheckpointError.
PvgNet<float> load_checkpoint(const std::filesystem::path& dir);

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

}  // namespace pvg
