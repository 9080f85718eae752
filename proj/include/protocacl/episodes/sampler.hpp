#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "protocacl/data/indexing.hpp"
#include "protocacl/random.hpp"

namespace protocacl::episodes {

struct EpisodeConfig {
  std::size_t n_way = 5;
  std::size_t k_shot = 5;
  std::size_t q_per_class = 5;
  // 0 keeps the query set uniform. In (0, 1) class c receives
  // max(1, round(q_per_class * (1 - skew * c / (n_way - 1)))) queries.
  double query_skew = 0.0;

  void validate() const;
  std::size_t queries_for_class(std::size_t cls) const;
  friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

// Training (N1, K1) and inference (N2, K2) episode shapes; they may differ.
struct InconsistentPlan {
  EpisodeConfig train;
  EpisodeConfig infer;
};

struct EpisodeItem {
  const data::IndexedSample* sample = nullptr;
  std::size_t cls = 0;
};

// Support is class-major with exactly k_shot rows per class; query likewise.
struct Episode {
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
  std::vector<std::string> class_to_relation;

  std::size_t n_way() const noexcept { return class_to_relation.size(); }
  std::vector<std::size_t> support_labels() const;
  std::vector<std::size_t> query_labels() const;
};

// Relations uniformly without replacement, then per relation k_shot + q
// samples without replacement. Throws CapacityError naming a deficient relation.
Episode sample_episode(const data::IndexedDataset& dataset, const EpisodeConfig& config, Rng& rng);

// Counter-based stream: episode i is a pure function of (dataset, config, seed, i).
class EpisodeStream {
 public:
  EpisodeStream(const data::IndexedDataset& dataset, EpisodeConfig config, std::uint64_t seed,
                std::size_t count);

  Episode at(std::size_t i) const;
  std::size_t count() const noexcept { return count_; }
  const EpisodeConfig& config() const noexcept { return config_; }

 private:
  const data::IndexedDataset* dataset_;
  EpisodeConfig config_;
  std::uint64_t seed_;
  std::size_t count_;
};

inline EpisodeStream episode_stream(const data::IndexedDataset& dataset, const EpisodeConfig& config,
                                    std::uint64_t seed, std::size_t count) {
  return EpisodeStream(dataset, config, seed, count);
}

}  // namespace protocacl::episodes
