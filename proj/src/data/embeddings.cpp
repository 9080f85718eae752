#include "protocacl/data/embeddings.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "protocacl/errors.hpp"

namespace protocacl::data {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), oov_(dim, 0.0) {
  if (dim == 0) throw ContractError("embedding dimension must be positive");
}

bool EmbeddingTable::insert(const std::string& token, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw DimensionError("embedding for '" + token + "' has " + std::to_string(vector.size()) +
                         " values, expected " + std::to_string(dim_));
  }
  if (index_.contains(token)) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  values_.insert(values_.end(), vector.begin(), vector.end());
  return true;
}

std::span<const double> EmbeddingTable::lookup(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return oov_;
  return std::span<const double>(values_).subspan(it->second * dim_, dim_);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  EmbeddingTable table(dim);
  std::string line;
  std::vector<double> vec;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    vec.clear();
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      const auto* first = field.data();
      const auto* last = field.data() + field.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) {
        throw ParseError(path.string(), lineno, "not a decimal: '" + field + "'");
      }
      vec.push_back(v);
    }
    if (vec.size() != dim) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(dim) + " values, got " + std::to_string(vec.size()));
    }
    table.insert(token, vec);
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[40];
  for (const auto& token : table.tokens()) {
    out << token;
    for (double v : table.lookup(token)) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace protocacl::data
