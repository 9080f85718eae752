#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace protocacl::data {

// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

// One relation-classification instance: pre-tokenized sentence with a head
// and a tail entity mention.
struct Sample {
  std::vector<std::string> tokens;
  Span head;
  Span tail;
  std::string relation;
  friend bool operator==(const Sample&, const Sample&) = default;
};

// Throws ContractError unless both spans are nonempty and inside the sentence.
void validate(const Sample& sample);

// Relation id -> instances. Ordered by relation id so iteration is stable.
class Dataset {
 public:
  Dataset() = default;

  void add(Sample sample);
  const std::map<std::string, std::vector<Sample>>& relations() const noexcept { return relations_; }
  std::vector<std::string> relation_ids() const;
  std::size_t num_relations() const noexcept { return relations_.size(); }
  std::size_t num_samples() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::map<std::string, std::vector<Sample>> relations_;
};

// FewRel layout: {relation: [{"tokens": [...], "h": [name, id, [[idx...]]], "t": ...}]}.
// Spans use the first mention list: (min, max + 1).
Dataset parse_fewrel(const nlohmann::json& doc, const std::string& source = "<json>");
Dataset load_fewrel(const std::filesystem::path& path);

nlohmann::json to_fewrel_json(const Dataset& dataset);
void save_fewrel(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace protocacl::data
