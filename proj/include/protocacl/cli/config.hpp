#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocacl/data/synthetic.hpp"
#include "protocacl/model/loss_check.hpp"
#include "protocacl/model/params.hpp"
#include "protocacl/training/trainer.hpp"

namespace protocacl::cli {

struct GridCellConfig {
  std::string id;
  std::string variant = "proto";
  std::size_t n1 = 5, k1 = 5, n2 = 5, k2 = 5;
};

struct GridConfig {
  std::string preset = "table4";  // table2, table3, table4, custom
  std::vector<std::string> variants = {"proto"};
  std::vector<std::uint64_t> seeds;  // empty: the run seed
  std::size_t n_way = 5;             // table2 only
  std::vector<GridCellConfig> cells; // custom only
};

// Fully resolved run description. Exactly one of `synthetic` and
// `fewrel_path` is set.
struct RunConfig {
  std::optional<data::SynthConfig> synthetic;
  std::string fewrel_path;
  std::string fewrel_eval_path;
  std::string embeddings_path;
  bool lowercase = true;
  model::EncoderConfig encoder;
  std::string variant = "protocacl";
  training::TrainConfig train;
  std::string checkpoint;
  GridConfig grid;
  model::LossCheckConfig gradcheck;
  std::filesystem::path output = "out";
  std::vector<std::string> formats = {"csv", "markdown", "json"};
  std::size_t jobs = 1;

  void validate() const;
};

// Accepts a JSON object or key=value lines with dotted keys ("train.iterations = 2000",
// '#' comments). Values in key=value form are read as JSON when they parse, strings otherwise.
nlohmann::json parse_config_text(const std::string& text, const std::string& source = "config");

// Unknown keys and ill-typed values raise ConfigError naming the dotted field.
RunConfig config_from_json(const nlohmann::json& doc);
// Every field with its resolved value; feeding it back yields the same RunConfig.
nlohmann::json config_to_json(const RunConfig& config);

RunConfig load_config(const std::filesystem::path& path);

}  // namespace protocacl::cli
