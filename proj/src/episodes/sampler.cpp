#include "protocacl/episodes/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protocacl/errors.hpp"

namespace protocacl::episodes {

void EpisodeConfig::validate() const {
  if (n_way == 0) throw ConfigError("n_way", "must be positive");
  if (k_shot == 0) throw ConfigError("k_shot", "must be positive");
  if (q_per_class == 0) throw ConfigError("q_per_class", "must be positive");
  if (!(query_skew >= 0.0 && query_skew < 1.0)) throw ConfigError("query_skew", "must lie in [0, 1)");
}

std::size_t EpisodeConfig::queries_for_class(std::size_t cls) const {
  if (query_skew == 0.0 || n_way < 2) return q_per_class;
  const double frac = static_cast<double>(cls) / static_cast<double>(n_way - 1);
  const auto q = std::llround(static_cast<double>(q_per_class) * (1.0 - query_skew * frac));
  return static_cast<std::size_t>(std::max<long long>(1, q));
}

std::vector<std::size_t> Episode::support_labels() const {
  std::vector<std::size_t> out;
  out.reserve(support.size());
  for (const auto& item : support) out.push_back(item.cls);
  return out;
}

std::vector<std::size_t> Episode::query_labels() const {
  std::vector<std::size_t> out;
  out.reserve(query.size());
  for (const auto& item : query) out.push_back(item.cls);
  return out;
}

namespace {

// First `take` entries of a uniform random permutation of 0..n-1.
std::vector<std::size_t> choose(std::size_t n, std::size_t take, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return idx;
}

}  // namespace

Episode sample_episode(const data::IndexedDataset& dataset, const EpisodeConfig& config, Rng& rng) {
  config.validate();
  if (config.n_way > dataset.num_relations()) {
    throw CapacityError("episode needs " + std::to_string(config.n_way) + " relations but dataset has " +
                        std::to_string(dataset.num_relations()));
  }
  Episode ep;
  const auto relations = choose(dataset.num_relations(), config.n_way, rng);
  for (std::size_t cls = 0; cls < relations.size(); ++cls) {
    const auto r = relations[cls];
    const auto& pool = dataset.samples[r];
    const auto q = config.queries_for_class(cls);
    const auto need = config.k_shot + q;
    if (pool.size() < need) {
      throw CapacityError("relation " + dataset.relation_ids[r] + " has " + std::to_string(pool.size()) +
                          " samples, episode needs " + std::to_string(need));
    }
    const auto picked = choose(pool.size(), need, rng);
    for (std::size_t i = 0; i < need; ++i) {
      auto& dst = i < config.k_shot ? ep.support : ep.query;
      dst.push_back({&pool[picked[i]], cls});
    }
    ep.class_to_relation.push_back(dataset.relation_ids[r]);
  }
  return ep;
}

EpisodeStream::EpisodeStream(const data::IndexedDataset& dataset, EpisodeConfig config, std::uint64_t seed,
                             std::size_t count)
    : dataset_(&dataset), config_(config), seed_(seed), count_(count) {
  config_.validate();
}

Episode EpisodeStream::at(std::size_t i) const {
  if (i >= count_) {
    throw ContractError("episode " + std::to_string(i) + " requested from a stream of " + std::to_string(count_));
  }
  Rng rng(derive_seed(seed_, "episode", i));
  return sample_episode(*dataset_, config_, rng);
}

}  // namespace protocacl::episodes
