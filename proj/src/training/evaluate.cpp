#include "protocacl/training/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <vector>

#include "protocacl/errors.hpp"
#include "protocacl/model/losses.hpp"

namespace protocacl::training {

double episode_accuracy(const episodes::Episode& episode, const model::ModelParams& params,
                        bool use_cross_attention) {
  const auto probs = model::predict(episode, params, use_cross_attention);
  const auto labels = episode.query_labels();
  std::size_t correct = 0;
  for (std::size_t q = 0; q < labels.size(); ++q) {
    const auto row = probs.row(q);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[q]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

EvalReport evaluate(const data::IndexedDataset& dataset, const model::ModelParams& params,
                    const episodes::EpisodeConfig& config, std::size_t episodes, std::uint64_t seed,
                    bool use_cross_attention, std::size_t jobs) {
  config.validate();
  if (episodes < 1) throw ConfigError("eval_iterations", "must be at least 1");
  const episodes::EpisodeStream stream(dataset, config, seed, episodes);
  std::vector<double> acc(episodes, 0.0);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < episodes; i += step) acc[i] = episode_accuracy(stream.at(i), params, use_cross_attention);
  };
  jobs = std::clamp<std::size_t>(jobs, 1, episodes);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          work(j, jobs);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  double sum = 0.0;
  for (double a : acc) sum += a;
  const double mean = sum / static_cast<double>(episodes);
  double sq = 0.0;
  for (double a : acc) sq += (a - mean) * (a - mean);
  EvalReport report;
  report.accuracy_mean = mean;
  report.accuracy_std = std::sqrt(sq / static_cast<double>(episodes));
  report.episodes = episodes;
  report.config = config;
  report.use_cross_attention = use_cross_attention;
  report.seed = seed;
  return report;
}

}  // namespace protocacl::training
