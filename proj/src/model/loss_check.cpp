#include "protocacl/model/loss_check.hpp"

#include "protocacl/data/indexing.hpp"
#include "protocacl/data/synthetic.hpp"
#include "protocacl/random.hpp"

namespace protocacl::model {

namespace {

LossConfig only(double ce, double dist, double cl) {
  LossConfig c;
  c.weights = {ce, dist, cl, ClMode::support_and_query};
  c.use_cross_attention = true;
  return c;
}

}  // namespace

std::vector<LossCheckEntry> check_loss_gradients(const LossCheckConfig& config) {
  config.encoder.validate();
  config.episode.validate();
  data::SynthConfig sc;
  sc.num_relations = config.episode.n_way;
  sc.per_relation = config.episode.k_shot + config.episode.q_per_class;
  sc.vocab_size = config.vocab_size;
  sc.sentence_len = config.sentence_len;
  sc.signal_strength = 1.0;
  sc.seed = config.seed;
  sc.embedding_dim = config.encoder.word_dim;
  const auto synth = data::synth_generate(sc);
  const auto vocab = data::Vocabulary::from_embeddings(synth.embeddings);
  const auto indexed =
      data::index_dataset(synth.dataset, vocab, {config.encoder.max_len, config.encoder.pos_clip, true});
  Rng rng(derive_seed(config.seed, "gradcheck-episode"));
  const auto episode = episodes::sample_episode(indexed, config.episode, rng);
  auto params = init_params(config.encoder, vocab, synth.embeddings, derive_seed(config.seed, "init"));

  std::vector<LossCheckEntry> out = {{"ce", only(1, 0, 0), {}, false},
                                     {"dist", only(0, 1, 0), {}, false},
                                     {"cl", only(0, 0, 1), {}, false},
                                     {"combined", variant_config(ModelVariant::protocacl), {}, false}};
  std::vector<num::NumArray> arrays;
  for (const auto& [name, a] : params.named()) arrays.push_back(*a);
  for (auto& entry : out) {
    const auto loss = entry.loss;
    const num::ScalarFn f = [&](num::Tape&, std::span<const num::Var> vars) {
      return episode_loss(episode, vars_from(vars), config.encoder, loss).total;
    };
    entry.result = num::grad_check(f, arrays, config.eps);
    entry.passed = entry.result.max_relative_error <= config.tolerance;
  }
  return out;
}

}  // namespace protocacl::model
