#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "protocacl/data/dataset.hpp"
#include "protocacl/data/embeddings.hpp"

namespace protocacl::data {

struct SynthConfig {
  std::size_t num_relations = 5;
  std::size_t per_relation = 100;
  std::size_t vocab_size = 500;
  std::size_t sentence_len = 16;
  double signal_strength = 2.0;
  std::uint64_t seed = 1;
  std::size_t embedding_dim = 50;
  // Probability that each signature token is independently replaced by a
  // filler token. Zero gives perfectly separable relations.
  double signature_dropout = 0.0;
};

struct SynthResult {
  Dataset dataset;
  EmbeddingTable embeddings;
};

// Token w{2r} / w{2r+1} is relation r's head / tail signature; every other
// token is filler. Entities are single tokens placed at random distinct
// positions. Embeddings are unit-norm, keyed by (seed, token), with
// signatures scaled by signal_strength. Throws ConfigError on bad sizes.
SynthResult synth_generate(const SynthConfig& config);

std::string synth_token(std::size_t index);
std::string synth_relation(std::size_t index, std::size_t num_relations);

}  // namespace protocacl::data
