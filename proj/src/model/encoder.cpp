#include "protocacl/model/encoder.hpp"

#include <algorithm>

#include "protocacl/errors.hpp"

namespace protocacl::model {

num::Var encode_batch(const ModelVars& vars, const EncoderConfig& config,
                      std::span<const data::IndexedSample* const> samples) {
  if (samples.empty()) throw ContractError("encode_batch: no samples");
  const auto clip = static_cast<int>(config.pos_clip);
  std::vector<std::size_t> words, heads, tails, lengths;
  for (const auto* s : samples) {
    if (s->length == 0) throw ContractError("encode: sample has zero length");
    if (s->length > s->token_ids.size()) throw ContractError("encode: length exceeds padded size");
    lengths.push_back(s->length);
    for (std::size_t i = 0; i < s->length; ++i) {
      words.push_back(s->token_ids[i]);
      heads.push_back(static_cast<std::size_t>(std::clamp(s->head_rel_pos[i], -clip, clip) + clip));
      tails.push_back(static_cast<std::size_t>(std::clamp(s->tail_rel_pos[i], -clip, clip) + clip));
    }
  }
  const num::Var parts[] = {num::gather_rows(vars.word_emb, words), num::gather_rows(vars.pos_head, heads),
                            num::gather_rows(vars.pos_tail, tails)};
  auto features = num::concat_cols(parts);
  auto windows = num::unfold_windows(features, lengths, config.window);
  auto conv = num::add(num::matmul(windows, num::transpose(vars.conv_filters)), vars.conv_bias);
  return num::segment_max(num::relu(conv), lengths);
}

num::Var encode(const data::IndexedSample& sample, const ModelVars& vars, const EncoderConfig& config) {
  const data::IndexedSample* one[] = {&sample};
  return num::reshape(encode_batch(vars, config, one), {config.hidden});
}

}  // namespace protocacl::model
