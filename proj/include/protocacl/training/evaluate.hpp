#pragma once

#include <cstddef>
#include <cstdint>

#include "protocacl/data/indexing.hpp"
#include "protocacl/episodes/sampler.hpp"
#include "protocacl/model/params.hpp"

namespace protocacl::training {

// Mean and population standard deviation of per-episode query accuracies.
struct EvalReport {
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::size_t episodes = 0;
  episodes::EpisodeConfig config;
  bool use_cross_attention = false;
  std::uint64_t seed = 0;
};

// Fraction of queries whose argmax class equals the label.
double episode_accuracy(const episodes::Episode& episode, const model::ModelParams& params,
                        bool use_cross_attention);

// Episodes come from episode_stream(dataset, config, seed, episodes). `jobs`
// > 1 splits the stream across threads; the result does not depend on it.
EvalReport evaluate(const data::IndexedDataset& dataset, const model::ModelParams& params,
                    const episodes::EpisodeConfig& config, std::size_t episodes, std::uint64_t seed,
                    bool use_cross_attention, std::size_t jobs = 1);

}  // namespace protocacl::training
