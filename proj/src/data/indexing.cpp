#include "protocacl/data/indexing.hpp"

#include <algorithm>
#include <unordered_set>

#include "protocacl/errors.hpp"

namespace protocacl::data {

std::string to_lower_ascii(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i + 2).second) {
      throw ContractError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::from_embeddings(const EmbeddingTable& table, std::span<const Dataset* const> filter,
                                       bool lowercase) {
  std::unordered_set<std::string> seen;
  for (const auto* ds : filter) {
    for (const auto& [_, samples] : ds->relations()) {
      for (const auto& s : samples) {
        for (const auto& t : s.tokens) seen.insert(lowercase ? to_lower_ascii(t) : t);
      }
    }
  }
  std::vector<std::string> tokens;
  for (const auto& t : table.tokens()) {
    if (filter.empty() || seen.contains(t)) tokens.push_back(t);
  }
  return Vocabulary(std::move(tokens));
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kOov : it->second;
}

std::optional<IndexedSample> index_sample(const Sample& sample, const Vocabulary& vocab,
                                          const IndexConfig& config, std::size_t label) {
  validate(sample);
  if (config.max_len == 0) throw ContractError("max_len must be positive");
  if (sample.head.start >= config.max_len || sample.tail.start >= config.max_len) return std::nullopt;

  IndexedSample out;
  out.length = std::min(sample.tokens.size(), config.max_len);
  out.label = label;
  out.token_ids.assign(config.max_len, Vocabulary::kPad);
  out.head_rel_pos.assign(config.max_len, 0);
  out.tail_rel_pos.assign(config.max_len, 0);
  const auto clip = static_cast<long long>(config.pos_clip);
  auto rel = [clip](std::size_t i, std::size_t anchor) {
    const auto d = static_cast<long long>(i) - static_cast<long long>(anchor);
    return static_cast<int>(std::clamp(d, -clip, clip));
  };
  for (std::size_t i = 0; i < out.length; ++i) {
    const auto& tok = sample.tokens[i];
    out.token_ids[i] = vocab.id(config.lowercase ? to_lower_ascii(tok) : tok);
    out.head_rel_pos[i] = rel(i, sample.head.start);
    out.tail_rel_pos[i] = rel(i, sample.tail.start);
  }
  return out;
}

IndexedDataset index_dataset(const Dataset& dataset, const Vocabulary& vocab, const IndexConfig& config) {
  IndexedDataset out;
  for (const auto& [relation, samples] : dataset.relations()) {
    const auto label = out.relation_ids.size();
    std::vector<IndexedSample> indexed;
    indexed.reserve(samples.size());
    for (const auto& s : samples) {
      if (auto is = index_sample(s, vocab, config, label)) indexed.push_back(std::move(*is));
      else ++out.skipped;
    }
    out.relation_ids.push_back(relation);
    out.samples.push_back(std::move(indexed));
  }
  return out;
}

}  // namespace protocacl::data
