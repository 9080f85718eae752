#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "protocacl/data/embeddings.hpp"
#include "protocacl/data/indexing.hpp"
#include "protocacl/numerics/array.hpp"
#include "protocacl/numerics/tape.hpp"

namespace protocacl::model {

struct EncoderConfig {
  std::size_t word_dim = 50;
  std::size_t pos_dim = 5;
  std::size_t hidden = 230;
  std::size_t window = 3;
  std::size_t pos_clip = 40;
  std::size_t max_len = 128;

  void validate() const;
  std::size_t feature_dim() const noexcept { return word_dim + 2 * pos_dim; }
  std::size_t pos_rows() const noexcept { return 2 * pos_clip + 1; }
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Every trainable array: CNN encoder plus the attention projection h(x) = Wx + b.
struct ModelParams {
  EncoderConfig config;
  num::NumArray word_emb;      // [V x word_dim]
  num::NumArray pos_head;      // [pos_rows x pos_dim]
  num::NumArray pos_tail;      // [pos_rows x pos_dim]
  num::NumArray conv_filters;  // [hidden x window * feature_dim]
  num::NumArray conv_bias;     // [hidden]
  num::NumArray proj_weight;   // [hidden x hidden]
  num::NumArray proj_bias;     // [hidden]

  std::vector<std::pair<std::string, num::NumArray*>> named();
  std::vector<std::pair<std::string, const num::NumArray*>> named() const;
  double squared_norm() const;
};

// Word rows copied from the table (pad and OOV rows zero), filters and
// projection Glorot-uniform, position embeddings uniform(-0.1, 0.1), biases zero.
ModelParams init_params(const EncoderConfig& config, const data::Vocabulary& vocab,
                        const data::EmbeddingTable& table, std::uint64_t seed);

// Parameters bound to a tape as (borrowed) leaves.
struct ModelVars {
  num::Var word_emb, pos_head, pos_tail, conv_filters, conv_bias, proj_weight, proj_bias;
  std::vector<num::Var> all() const {
    return {word_emb, pos_head, pos_tail, conv_filters, conv_bias, proj_weight, proj_bias};
  }
};

ModelVars bind(num::Tape& tape, const ModelParams& params, bool trainable = true);

// Same ordering as ModelParams::named().
ModelVars vars_from(std::span<const num::Var> vars);

}  // namespace protocacl::model
