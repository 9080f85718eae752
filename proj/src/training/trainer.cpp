#include "protocacl/training/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "protocacl/errors.hpp"
#include "protocacl/random.hpp"

namespace protocacl::training {

void TrainConfig::validate() const {
  plan.train.validate();
  plan.infer.validate();
  if (iterations < 1) throw ConfigError("iterations", "must be at least 1");
  if (eval_iterations < 1) throw ConfigError("eval_iterations", "must be at least 1");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("learning_rate", "must be nonnegative");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be nonnegative");
  if (optimizer.grad_clip && !(*optimizer.grad_clip > 0.0)) throw ConfigError("grad_clip", "must be positive");
  loss.weights.validate();
}

namespace {

std::string describe(const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "non-finite loss at iteration %zu (ce=%g dist=%g cl=%g total=%g)", r.iteration,
                r.ce, r.dist, r.cl, r.total);
  return buf;
}

}  // namespace

NonFiniteLossError::NonFiniteLossError(const LossRecord& record)
    : std::runtime_error(describe(record)), record_(record) {}

std::uint64_t train_stream_seed(std::uint64_t seed) { return derive_seed(seed, "train-episodes"); }
std::uint64_t eval_stream_seed(std::uint64_t seed) { return derive_seed(seed, "eval-episodes"); }

double sgd_step(model::ModelParams& params, const std::vector<num::NumArray>& grads, const OptimizerConfig& opt) {
  auto named = params.named();
  if (grads.size() != named.size()) throw ContractError("sgd_step: one gradient per parameter expected");
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  double factor = 1.0;
  if (opt.grad_clip && norm > *opt.grad_clip) factor = *opt.grad_clip / norm;
  const double lr = opt.learning_rate;
  const double wd = opt.weight_decay;
  for (std::size_t k = 0; k < named.size(); ++k) {
    auto& p = *named[k].second;
    const auto& g = grads[k];
    if (g.shape() != p.shape()) throw DimensionError("sgd_step: gradient shape mismatch for " + named[k].first);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (factor * g[i] + wd * p[i]);
  }
  return norm;
}

TrainResult train(const data::IndexedDataset& dataset, model::ModelParams initial, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.validate();
  TrainResult result{std::move(initial), {}};
  result.trace.reserve(config.iterations);
  const episodes::EpisodeStream stream(dataset, config.plan.train, train_stream_seed(config.seed),
                                       config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto episode = stream.at(it);
    num::Tape tape;
    const auto vars = model::bind(tape, result.params);
    const auto loss = model::episode_loss(episode, vars, result.params.config, config.loss);
    LossRecord rec{it, loss.ce, loss.dist, loss.cl, loss.total.value().item()};
    if (!std::isfinite(rec.total) || !std::isfinite(rec.ce) || !std::isfinite(rec.dist) ||
        !std::isfinite(rec.cl)) {
      throw NonFiniteLossError(rec);
    }
    const auto grads = tape.backward(loss.total);
    std::vector<num::NumArray> g;
    g.reserve(7);
    for (const auto& v : vars.all()) g.push_back(grads.of(v));
    sgd_step(result.params, g, config.optimizer);
    result.trace.push_back(rec);
    if (progress) progress(rec);
  }
  return result;
}

}  // namespace protocacl::training
