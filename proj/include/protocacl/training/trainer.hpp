#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "protocacl/data/indexing.hpp"
#include "protocacl/episodes/sampler.hpp"
#include "protocacl/model/losses.hpp"
#include "protocacl/model/params.hpp"
#include "protocacl/numerics/tape.hpp"

namespace protocacl::training {

struct OptimizerConfig {
  double learning_rate = 0.1;
  double weight_decay = 1e-5;
  std::optional<double> grad_clip = 10.0;  // global L2 norm; nullopt disables
};

struct TrainConfig {
  episodes::InconsistentPlan plan;
  std::size_t iterations = 2000;
  std::size_t eval_iterations = 500;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  model::LossConfig loss;

  void validate() const;
};

struct LossRecord {
  std::size_t iteration = 0;
  double ce = 0.0;
  double dist = 0.0;
  double cl = 0.0;
  double total = 0.0;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<LossRecord> trace;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  explicit NonFiniteLossError(const LossRecord& record);
  const LossRecord& record() const noexcept { return record_; }

 private:
  LossRecord record_;
};

// One SGD step: g' = clip(g), p <- p - lr * (g' + weight_decay * p).
// `grads` holds one entry per named parameter (same order). Returns the
// pre-clip global gradient norm.
double sgd_step(model::ModelParams& params, const std::vector<num::NumArray>& grads, const OptimizerConfig& opt);

using ProgressFn = std::function<void(const LossRecord&)>;

// Episodic training on episode_stream(dataset, plan.train, seed). Throws
// NonFiniteLossError with the iteration's component losses on NaN/Inf.
TrainResult train(const data::IndexedDataset& dataset, model::ModelParams initial, const TrainConfig& config,
                  const ProgressFn& progress = {});

// Seed of the training episode stream; parameter initialisation uses a separate one.
std::uint64_t train_stream_seed(std::uint64_t seed);
std::uint64_t eval_stream_seed(std::uint64_t seed);

}  // namespace protocacl::training
