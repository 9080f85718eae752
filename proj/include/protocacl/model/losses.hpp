#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protocacl/episodes/sampler.hpp"
#include "protocacl/model/params.hpp"
#include "protocacl/numerics/ops.hpp"

namespace protocacl::model {

// Which embeddings the contrastive term is applied to.
enum class ClMode { off, support, query, support_and_query };
// Distance between two support->query distributions.
enum class DistMetric { squared_euclidean, symmetric_kl };

struct LossWeights {
  double lambda_ce = 1.0;
  double lambda_dist = 0.1;
  double lambda_cl = 0.1;
  ClMode cl_mode = ClMode::support_and_query;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossConfig {
  LossWeights weights;
  bool use_cross_attention = true;
  DistMetric dist_metric = DistMetric::squared_euclidean;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

// Ablation rows: ProtoNet, contrastive-only on S / Q / S+Q, cross-attention
// without contrastive term, and the full model.
enum class ModelVariant { proto, proto_s, proto_q, proto_s_and_q, without_cl, protocacl };

LossConfig variant_config(ModelVariant variant);
std::string_view variant_name(ModelVariant variant);
std::optional<ModelVariant> parse_variant(std::string_view name);
std::string_view cl_mode_name(ClMode mode);
std::optional<ClMode> parse_cl_mode(std::string_view name);
std::string_view dist_metric_name(DistMetric metric);
std::optional<DistMetric> parse_dist_metric(std::string_view name);

inline constexpr double kRatioEpsilon = 1e-8;

// Ratio-of-sums loss; `degenerate` when the cross-class sum is below kRatioEpsilon.
struct RatioLoss {
  num::Var value;
  bool degenerate = false;
};

// Rows of each class; throws ContractError when a class in [0, num_classes) is empty.
std::vector<std::vector<std::size_t>> rows_by_class(std::span<const std::size_t> labels,
                                                    std::size_t num_classes);

// Per-class arithmetic mean of support rows: [N*K x H] -> [N x H].
num::Var prototypes_mean(num::Var support, std::span<const std::size_t> labels, std::size_t num_classes);

// Softmax over sim(x, c_r) = -||x - c_r||^2. Returns [N].
num::Var classify(num::Var query, num::Var prototypes);

// Row (r, i) is softmax over queries of the dot products s_r^i . q_j.
struct DistributionMatrix {
  num::Var rows;      // [N*K x |Q|]
  num::Var log_rows;  // log of rows, computed stably
  std::vector<std::size_t> class_of_row;
};

// Throws ConfigError when fewer than two queries are given.
DistributionMatrix support_query_distributions(num::Var support, std::span<const std::size_t> labels,
                                               num::Var query);

// Same-class pair distances over cross-class pair distances (+ epsilon).
// Ordered pairs; same-class pairs include i == j.
RatioLoss distribution_loss(const DistributionMatrix& d, DistMetric metric = DistMetric::squared_euclidean);

struct AttentionVars {
  num::Var weight;  // [H x H]
  num::Var bias;    // [H]
};

// Query-conditioned prototypes. For class r: e_i = sum(tanh(h(s_r^i) * h(q))),
// alpha = softmax(e) over the class's rows, c_r = sum_i alpha_i s_r^i.
num::Var cross_attention_prototypes(num::Var support, std::span<const std::size_t> labels,
                                    std::size_t num_classes, num::Var query, const AttentionVars& attn);

// 1 / (1 + exp(cos(a, b))). Throws DomainError for near-zero vectors.
num::Var contrastive_distance(num::Var a, num::Var b);

// Sum over same-class ordered pairs of exp(dis) over the cross-class sum (+ epsilon).
RatioLoss contrastive_loss(num::Var embeddings, std::span<const std::size_t> labels);

struct EpisodeLoss {
  num::Var total;
  double ce = 0.0;
  double dist = 0.0;  // 0 when lambda_dist == 0
  double cl = 0.0;    // 0 when the contrastive term is inactive
  num::NumArray probs;  // [|Q| x N]
};

EpisodeLoss episode_loss(const episodes::Episode& episode, const ModelVars& vars,
                         const EncoderConfig& encoder, const LossConfig& config);

// Class probabilities for every query, [|Q| x N]; parameters are read only.
num::NumArray predict(const episodes::Episode& episode, const ModelParams& params, bool use_cross_attention);

}  // namespace protocacl::model
