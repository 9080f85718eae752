#pragma once

#include <span>

#include "protocacl/data/indexing.hpp"
#include "protocacl/model/params.hpp"
#include "protocacl/numerics/ops.hpp"

namespace protocacl::model {

// CNN sentence encoder. Each position is [word ; head-position ; tail-position]
// embeddings; a width-`window` convolution (zero outside the sentence, stride 1)
// is followed by ReLU and a max-pool over the true length only.
// Returns [samples x hidden]. Throws ContractError on a zero-length sample.
num::Var encode_batch(const ModelVars& vars, const EncoderConfig& config,
                      std::span<const data::IndexedSample* const> samples);

// Single-sample form; returns a [hidden] vector.
num::Var encode(const data::IndexedSample& sample, const ModelVars& vars, const EncoderConfig& config);

}  // namespace protocacl::model
