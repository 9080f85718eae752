#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocacl/data/indexing.hpp"
#include "protocacl/model/params.hpp"

namespace protocacl::model {

inline constexpr int kCheckpointVersion = 1;

// Architecture + vocabulary identity. Two runs can share a checkpoint only
// when their fingerprints agree.
std::string fingerprint(const EncoderConfig& config, const data::Vocabulary& vocab);

struct Checkpoint {
  ModelParams params;
  data::Vocabulary vocab;
  std::string fingerprint;
  nlohmann::json metadata;
};

// JSON record of named arrays (shape + values). Doubles are written in
// shortest round-trip form, so save/load is bit-exact.
nlohmann::json checkpoint_to_json(const ModelParams& params, const data::Vocabulary& vocab,
                                  const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const data::Vocabulary& vocab,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace protocacl::model
