#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protocacl/episodes/sampler.hpp"
#include "protocacl/model/losses.hpp"
#include "protocacl/model/params.hpp"
#include "protocacl/numerics/gradcheck.hpp"

namespace protocacl::model {

// Finite-difference check of every loss term on a tiny synthetic episode.
struct LossCheckConfig {
  EncoderConfig encoder{4, 2, 8, 3, 3, 8};
  episodes::EpisodeConfig episode{2, 2, 2, 0.0};
  std::size_t sentence_len = 6;
  std::size_t vocab_size = 12;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
};

struct LossCheckEntry {
  std::string name;  // ce, dist, cl, combined
  LossConfig loss;
  num::GradCheckResult result;
  bool passed = false;
};

std::vector<LossCheckEntry> check_loss_gradients(const LossCheckConfig& config);

}  // namespace protocacl::model
