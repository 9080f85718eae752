#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "protocacl/data/dataset.hpp"
#include "protocacl/data/embeddings.hpp"

namespace protocacl::data {

// Token -> row of the word-embedding parameter. Row 0 is padding, row 1 the
// shared out-of-vocabulary row; known tokens follow in insertion order.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kOov = 1;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // Every table token, or only those occurring (after optional lowercasing)
  // in one of `filter` when it is nonempty.
  static Vocabulary from_embeddings(const EmbeddingTable& table,
                                    std::span<const Dataset* const> filter = {},
                                    bool lowercase = true);

  std::size_t size() const noexcept { return tokens_.size() + 2; }
  std::size_t id(const std::string& token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct IndexConfig {
  std::size_t max_len = 128;
  std::size_t pos_clip = 40;
  bool lowercase = true;
};

struct IndexedSample {
  std::vector<std::size_t> token_ids;    // max_len, padded with Vocabulary::kPad
  std::vector<int> head_rel_pos;         // max_len, clipped to [-pos_clip, pos_clip], 0 on padding
  std::vector<int> tail_rel_pos;
  std::size_t length = 0;                // true token count after truncation
  std::size_t label = 0;                 // relation index within the indexed dataset
};

// nullopt is the skip signal: an entity starts at or beyond max_len.
std::optional<IndexedSample> index_sample(const Sample& sample, const Vocabulary& vocab,
                                          const IndexConfig& config, std::size_t label = 0);

std::string to_lower_ascii(std::string s);

// Dataset converted for the encoder. Relations keep the Dataset's order.
struct IndexedDataset {
  std::vector<std::string> relation_ids;
  std::vector<std::vector<IndexedSample>> samples;
  std::size_t skipped = 0;

  std::size_t num_relations() const noexcept { return relation_ids.size(); }
};

IndexedDataset index_dataset(const Dataset& dataset, const Vocabulary& vocab, const IndexConfig& config);

}  // namespace protocacl::data
