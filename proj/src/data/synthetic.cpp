#include "protocacl/data/synthetic.hpp"

#include <cmath>
#include <vector>

#include "protocacl/errors.hpp"
#include "protocacl/random.hpp"

namespace protocacl::data {

std::string synth_token(std::size_t index) { return "w" + std::to_string(index); }

std::string synth_relation(std::size_t index, std::size_t num_relations) {
  const auto width = std::to_string(num_relations > 0 ? num_relations - 1 : 0).size();
  auto digits = std::to_string(index);
  return "syn" + std::string(width - digits.size(), '0') + digits;
}

namespace {

std::vector<double> unit_vector(std::uint64_t seed, const std::string& token, std::size_t dim) {
  Rng rng(derive_seed(seed, "synth-embedding", fnv1a(token)));
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.uniform(-1.0, 1.0);
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& cfg) {
  if (cfg.num_relations < 2) throw ConfigError("num_relations", "must be at least 2");
  if (cfg.per_relation < 2) throw ConfigError("per_relation", "must be at least 2");
  if (cfg.sentence_len < 2) throw ConfigError("sentence_len", "must be at least 2");
  if (cfg.embedding_dim == 0) throw ConfigError("embedding_dim", "must be positive");
  if (!(cfg.signal_strength >= 0.0)) throw ConfigError("signal_strength", "must be nonnegative");
  if (!(cfg.signature_dropout >= 0.0 && cfg.signature_dropout <= 1.0)) {
    throw ConfigError("signature_dropout", "must lie in [0, 1]");
  }
  const auto signatures = 2 * cfg.num_relations;
  if (cfg.vocab_size <= signatures) {
    throw ConfigError("vocab_size", "vocabulary of " + std::to_string(cfg.vocab_size) +
                                        " cannot host " + std::to_string(signatures) +
                                        " signature tokens plus filler");
  }
  const auto filler = cfg.vocab_size - signatures;

  SynthResult out{Dataset{}, EmbeddingTable(cfg.embedding_dim)};
  Rng rng(derive_seed(cfg.seed, "synth-sentences"));
  for (std::size_t r = 0; r < cfg.num_relations; ++r) {
    const auto relation = synth_relation(r, cfg.num_relations);
    for (std::size_t n = 0; n < cfg.per_relation; ++n) {
      Sample s;
      s.relation = relation;
      s.tokens.reserve(cfg.sentence_len);
      for (std::size_t i = 0; i < cfg.sentence_len; ++i) {
        s.tokens.push_back(synth_token(signatures + rng.index(filler)));
      }
      const auto head = rng.index(cfg.sentence_len);
      auto tail = rng.index(cfg.sentence_len - 1);
      if (tail >= head) ++tail;
      if (rng.unit() >= cfg.signature_dropout) s.tokens[head] = synth_token(2 * r);
      if (rng.unit() >= cfg.signature_dropout) s.tokens[tail] = synth_token(2 * r + 1);
      s.head = {head, head + 1};
      s.tail = {tail, tail + 1};
      out.dataset.add(std::move(s));
    }
  }

  for (std::size_t t = 0; t < cfg.vocab_size; ++t) {
    const auto token = synth_token(t);
    auto v = unit_vector(cfg.seed, token, cfg.embedding_dim);
    if (t < signatures) {
      for (auto& x : v) x *= cfg.signal_strength;
    }
    out.embeddings.insert(token, v);
  }
  return out;
}

}  // namespace protocacl::data
