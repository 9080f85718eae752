#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace protocacl::data {

// Pretrained word vectors. Unknown tokens resolve to the zero OOV vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // Returns false (and keeps the existing vector) when the token is present.
  bool insert(const std::string& token, std::span<const double> vector);
  bool contains(const std::string& token) const { return index_.contains(token); }
  std::span<const double> lookup(const std::string& token) const;
  std::span<const double> oov_vector() const noexcept { return oov_; }

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
  std::vector<double> oov_;
};

// GloVe-style text: one token then `dim` decimals per line. Blank lines are
// skipped; duplicates keep the first occurrence.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

}  // namespace protocacl::data
