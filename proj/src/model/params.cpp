#include "protocacl/model/params.hpp"

#include <cmath>

#include "protocacl/errors.hpp"
#include "protocacl/random.hpp"

namespace protocacl::model {

void EncoderConfig::validate() const {
  if (word_dim == 0) throw ConfigError("word_dim", "must be positive");
  if (pos_dim == 0) throw ConfigError("pos_dim", "must be positive");
  if (hidden == 0) throw ConfigError("hidden", "must be positive");
  if (window == 0) throw ConfigError("window", "must be positive");
  if (max_len == 0) throw ConfigError("max_len", "must be positive");
}

std::vector<std::pair<std::string, num::NumArray*>> ModelParams::named() {
  return {{"word_emb", &word_emb},         {"pos_head", &pos_head},   {"pos_tail", &pos_tail},
          {"conv_filters", &conv_filters}, {"conv_bias", &conv_bias}, {"proj_weight", &proj_weight},
          {"proj_bias", &proj_bias}};
}

std::vector<std::pair<std::string, const num::NumArray*>> ModelParams::named() const {
  return {{"word_emb", &word_emb},         {"pos_head", &pos_head},   {"pos_tail", &pos_tail},
          {"conv_filters", &conv_filters}, {"conv_bias", &conv_bias}, {"proj_weight", &proj_weight},
          {"proj_bias", &proj_bias}};
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : named()) {
    for (double v : p->values()) s += v * v;
  }
  return s;
}

namespace {

num::NumArray uniform(num::Shape shape, double bound, Rng& rng) {
  num::NumArray a(std::move(shape));
  for (auto& v : a.values()) v = rng.uniform(-bound, bound);
  return a;
}

}  // namespace

ModelParams init_params(const EncoderConfig& config, const data::Vocabulary& vocab,
                        const data::EmbeddingTable& table, std::uint64_t seed) {
  config.validate();
  if (table.dim() != config.word_dim) {
    throw ConfigError("word_dim", "embedding table has dimension " + std::to_string(table.dim()) +
                                      ", encoder expects " + std::to_string(config.word_dim));
  }
  ModelParams p;
  p.config = config;
  p.word_emb = num::NumArray({vocab.size(), config.word_dim});
  for (std::size_t i = 0; i < vocab.tokens().size(); ++i) {
    const auto v = table.lookup(vocab.tokens()[i]);
    auto row = p.word_emb.row(i + 2);
    std::copy(v.begin(), v.end(), row.begin());
  }

  Rng rng(derive_seed(seed, "init"));
  const auto fan_in = config.window * config.feature_dim();
  const double conv_bound = std::sqrt(6.0 / static_cast<double>(fan_in + config.hidden));
  const double proj_bound = std::sqrt(6.0 / static_cast<double>(2 * config.hidden));
  p.pos_head = uniform({config.pos_rows(), config.pos_dim}, 0.1, rng);
  p.pos_tail = uniform({config.pos_rows(), config.pos_dim}, 0.1, rng);
  p.conv_filters = uniform({config.hidden, fan_in}, conv_bound, rng);
  p.conv_bias = num::NumArray({config.hidden}, 0.0);
  p.proj_weight = uniform({config.hidden, config.hidden}, proj_bound, rng);
  p.proj_bias = num::NumArray({config.hidden}, 0.0);
  return p;
}

ModelVars bind(num::Tape& tape, const ModelParams& p, bool trainable) {
  return {tape.borrow(p.word_emb, trainable),     tape.borrow(p.pos_head, trainable),
          tape.borrow(p.pos_tail, trainable),     tape.borrow(p.conv_filters, trainable),
          tape.borrow(p.conv_bias, trainable),    tape.borrow(p.proj_weight, trainable),
          tape.borrow(p.proj_bias, trainable)};
}

ModelVars vars_from(std::span<const num::Var> v) {
  if (v.size() != 7) throw ContractError("vars_from expects 7 parameter leaves");
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

}  // namespace protocacl::model
