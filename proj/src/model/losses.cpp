#include "protocacl/model/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protocacl/errors.hpp"
#include "protocacl/model/encoder.hpp"

namespace protocacl::model {

using num::NumArray;
using num::Var;

void LossWeights::validate() const {
  if (!(lambda_ce >= 0.0)) throw ConfigError("lambda_ce", "must be nonnegative");
  if (!(lambda_dist >= 0.0)) throw ConfigError("lambda_dist", "must be nonnegative");
  if (!(lambda_cl >= 0.0)) throw ConfigError("lambda_cl", "must be nonnegative");
  const bool cl_active = lambda_cl > 0.0 && cl_mode != ClMode::off;
  if (!(lambda_ce > 0.0 || lambda_dist > 0.0 || cl_active)) {
    throw ConfigError("lambda_ce", "at least one loss weight must be positive");
  }
}

LossConfig variant_config(ModelVariant variant) {
  LossConfig c;
  switch (variant) {
    case ModelVariant::proto:
      c.weights = {1.0, 0.0, 0.0, ClMode::off};
      c.use_cross_attention = false;
      break;
    case ModelVariant::proto_s:
      c.weights = {1.0, 0.0, 0.1, ClMode::support};
      c.use_cross_attention = false;
      break;
    case ModelVariant::proto_q:
      c.weights = {1.0, 0.0, 0.1, ClMode::query};
      c.use_cross_attention = false;
      break;
    case ModelVariant::proto_s_and_q:
      c.weights = {1.0, 0.0, 0.1, ClMode::support_and_query};
      c.use_cross_attention = false;
      break;
    case ModelVariant::without_cl:
      c.weights = {1.0, 0.1, 0.0, ClMode::off};
      c.use_cross_attention = true;
      break;
    case ModelVariant::protocacl:
      c.weights = {1.0, 0.1, 0.1, ClMode::support_and_query};
      c.use_cross_attention = true;
      break;
  }
  return c;
}

namespace {

constexpr std::pair<ModelVariant, std::string_view> kVariants[] = {
    {ModelVariant::proto, "proto"},         {ModelVariant::proto_s, "proto_s"},
    {ModelVariant::proto_q, "proto_q"},     {ModelVariant::proto_s_and_q, "proto_s_and_q"},
    {ModelVariant::without_cl, "wo_cl"},    {ModelVariant::protocacl, "protocacl"}};

constexpr std::pair<ClMode, std::string_view> kClModes[] = {{ClMode::off, "off"},
                                                            {ClMode::support, "support"},
                                                            {ClMode::query, "query"},
                                                            {ClMode::support_and_query, "support_and_query"}};

constexpr std::pair<DistMetric, std::string_view> kMetrics[] = {
    {DistMetric::squared_euclidean, "squared_euclidean"}, {DistMetric::symmetric_kl, "symmetric_kl"}};

template <typename E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E e) {
  for (const auto& [k, v] : table) {
    if (k == e) return v;
  }
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> parse_of(const std::pair<E, std::string_view> (&table)[N], std::string_view s) {
  for (const auto& [k, v] : table) {
    if (v == s) return k;
  }
  return std::nullopt;
}

}  // namespace

std::string_view variant_name(ModelVariant v) { return name_of(kVariants, v); }
std::optional<ModelVariant> parse_variant(std::string_view s) { return parse_of(kVariants, s); }
std::string_view cl_mode_name(ClMode m) { return name_of(kClModes, m); }
std::optional<ClMode> parse_cl_mode(std::string_view s) { return parse_of(kClModes, s); }
std::string_view dist_metric_name(DistMetric m) { return name_of(kMetrics, m); }
std::optional<DistMetric> parse_dist_metric(std::string_view s) { return parse_of(kMetrics, s); }

std::vector<std::vector<std::size_t>> rows_by_class(std::span<const std::size_t> labels,
                                                    std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> rows(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw ContractError("label " + std::to_string(labels[i]) + " outside " + std::to_string(num_classes) +
                          " classes");
    }
    rows[labels[i]].push_back(i);
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (rows[c].empty()) throw ContractError("class " + std::to_string(c) + " has no rows");
  }
  return rows;
}

namespace {

std::size_t class_count(std::span<const std::size_t> labels) {
  if (labels.empty()) throw ContractError("no labels");
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

// sum(P * same) / (sum(P * cross) + eps) over an [M x M] pair matrix.
RatioLoss pair_ratio(Var pairs, std::span<const std::size_t> labels) {
  const auto classes = class_count(labels);
  rows_by_class(labels, classes);
  if (classes < 2) throw ContractError("ratio loss needs at least two classes");
  const auto m = labels.size();
  NumArray same({m, m}), cross({m, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const bool s = labels[i] == labels[j];
      same.at(i, j) = s ? 1.0 : 0.0;
      cross.at(i, j) = s ? 0.0 : 1.0;
    }
  }
  auto& tape = pairs.tape();
  auto numerator = num::sum(num::mul(pairs, tape.constant(std::move(same))));
  auto denominator = num::sum(num::mul(pairs, tape.constant(std::move(cross))));
  const bool degenerate = denominator.value().item() < kRatioEpsilon;
  return {num::div(numerator, num::shift(denominator, kRatioEpsilon)), degenerate};
}

std::vector<std::size_t> iota_from(std::size_t start, std::size_t count) {
  std::vector<std::size_t> v(count);
  std::iota(v.begin(), v.end(), start);
  return v;
}

}  // namespace

Var prototypes_mean(Var support, std::span<const std::size_t> labels, std::size_t num_classes) {
  const auto rows = rows_by_class(labels, num_classes);
  if (support.value().rows() != labels.size()) {
    throw DimensionError("prototypes_mean: " + std::to_string(labels.size()) + " labels for " +
                         num::shape_string(support.shape()));
  }
  NumArray avg({num_classes, labels.size()});
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double w = 1.0 / static_cast<double>(rows[c].size());
    for (auto r : rows[c]) avg.at(c, r) = w;
  }
  return num::matmul(support.tape().constant(std::move(avg)), support);
}

Var classify(Var query, Var prototypes) {
  const auto n = prototypes.value().rows();
  auto logits = num::neg(num::pairwise_sq_dist(query, prototypes));
  return num::softmax(num::reshape(logits, {n}), 0);
}

DistributionMatrix support_query_distributions(Var support, std::span<const std::size_t> labels, Var query) {
  if (query.value().rows() < 2 || query.value().rank() != 2) {
    throw ConfigError("q_per_class", "support->query distributions need at least two queries");
  }
  if (support.value().rows() != labels.size()) {
    throw DimensionError("support_query_distributions: " + std::to_string(labels.size()) + " labels for " +
                         num::shape_string(support.shape()));
  }
  auto scores = num::matmul(support, num::transpose(query));
  return {num::softmax(scores, 1), num::log_softmax(scores, 1), {labels.begin(), labels.end()}};
}

RatioLoss distribution_loss(const DistributionMatrix& d, DistMetric metric) {
  Var pairs;
  if (metric == DistMetric::squared_euclidean) {
    pairs = num::pairwise_sq_dist(d.rows, d.rows);
  } else {
    // KL(a||b) + KL(b||a) = sum (a - b)(log a - log b)
    const auto m = d.rows.value().rows();
    auto self = num::sum(num::mul(d.rows, d.log_rows), 1);
    auto cross = num::matmul(d.rows, num::transpose(d.log_rows));
    auto diag = num::add(num::reshape(self, {m, 1}), num::reshape(self, {1, m}));
    pairs = num::sub(diag, num::add(cross, num::transpose(cross)));
  }
  return pair_ratio(pairs, d.class_of_row);
}

namespace {

// Prototypes for one query given per-class support blocks and their projections.
Var attend(std::span<const Var> support_blocks, std::span<const Var> projected_blocks, Var projected_query) {
  std::vector<Var> protos;
  protos.reserve(support_blocks.size());
  for (std::size_t c = 0; c < support_blocks.size(); ++c) {
    const auto k = support_blocks[c].value().rows();
    auto scores = num::sum(num::tanh(num::mul(projected_blocks[c], projected_query)), 1);
    auto alpha = num::softmax(scores, 0);
    protos.push_back(num::matmul(num::reshape(alpha, {1, k}), support_blocks[c]));
  }
  return num::concat_rows(protos);
}

Var project(Var x, const AttentionVars& attn) {
  return num::add(num::matmul(x, num::transpose(attn.weight)), attn.bias);
}

std::vector<Var> class_blocks(Var x, const std::vector<std::vector<std::size_t>>& rows) {
  std::vector<Var> blocks;
  blocks.reserve(rows.size());
  for (const auto& r : rows) blocks.push_back(num::gather_rows(x, r));
  return blocks;
}

}  // namespace

Var cross_attention_prototypes(Var support, std::span<const std::size_t> labels, std::size_t num_classes,
                               Var query, const AttentionVars& attn) {
  const auto rows = rows_by_class(labels, num_classes);
  if (support.value().rows() != labels.size()) {
    throw DimensionError("cross_attention_prototypes: " + std::to_string(labels.size()) + " labels for " +
                         num::shape_string(support.shape()));
  }
  return attend(class_blocks(support, rows), class_blocks(project(support, attn), rows), project(query, attn));
}

Var contrastive_distance(Var a, Var b) {
  auto cosine = num::dot(num::l2_normalize(a), num::l2_normalize(b));
  return num::sigmoid(num::neg(cosine));
}

RatioLoss contrastive_loss(Var embeddings, std::span<const std::size_t> labels) {
  if (embeddings.value().rows() != labels.size() || embeddings.value().rank() != 2) {
    throw DimensionError("contrastive_loss: " + std::to_string(labels.size()) + " labels for " +
                         num::shape_string(embeddings.shape()));
  }
  auto unit = num::l2_normalize(embeddings);
  auto cosine = num::matmul(unit, num::transpose(unit));
  auto dis = num::sigmoid(num::neg(cosine));
  return pair_ratio(num::exp(dis), labels);
}

EpisodeLoss episode_loss(const episodes::Episode& episode, const ModelVars& vars,
                         const EncoderConfig& encoder, const LossConfig& config) {
  config.weights.validate();
  const auto n = episode.n_way();
  const auto ns = episode.support.size();
  const auto nq = episode.query.size();
  if (ns == 0 || nq == 0) throw ContractError("episode has an empty support or query set");

  std::vector<const data::IndexedSample*> samples;
  samples.reserve(ns + nq);
  for (const auto& it : episode.support) samples.push_back(it.sample);
  for (const auto& it : episode.query) samples.push_back(it.sample);
  const auto slabels = episode.support_labels();
  const auto qlabels = episode.query_labels();

  auto embeddings = encode_batch(vars, encoder, samples);
  const auto sidx = iota_from(0, ns);
  const auto qidx = iota_from(ns, nq);
  auto support = num::gather_rows(embeddings, sidx);
  auto query = num::gather_rows(embeddings, qidx);

  Var logits;
  if (config.use_cross_attention) {
    const AttentionVars attn{vars.proj_weight, vars.proj_bias};
    const auto rows = rows_by_class(slabels, n);
    const auto blocks = class_blocks(support, rows);
    const auto projected_blocks = class_blocks(project(support, attn), rows);
    auto projected_query = project(query, attn);
    std::vector<Var> per_query;
    per_query.reserve(nq);
    for (std::size_t j = 0; j < nq; ++j) {
      const std::size_t row[] = {j};
      auto q = num::gather_rows(query, row);
      auto protos = attend(blocks, projected_blocks, num::gather_rows(projected_query, row));
      per_query.push_back(num::neg(num::pairwise_sq_dist(q, protos)));
    }
    logits = num::concat_rows(per_query);
  } else {
    logits = num::neg(num::pairwise_sq_dist(query, prototypes_mean(support, slabels, n)));
  }

  auto log_probs = num::log_softmax(logits, 1);
  std::vector<std::size_t> truth(nq);
  for (std::size_t j = 0; j < nq; ++j) truth[j] = j * n + qlabels[j];
  auto ce = num::neg(num::mean(num::take(log_probs, truth)));

  EpisodeLoss out;
  const auto& w = config.weights;
  out.ce = ce.value().item();
  out.total = num::scale(ce, w.lambda_ce);
  if (w.lambda_dist > 0.0) {
    auto dist = distribution_loss(support_query_distributions(support, slabels, query), config.dist_metric);
    out.dist = dist.value.value().item();
    out.total = num::add(out.total, num::scale(dist.value, w.lambda_dist));
  }
  if (w.lambda_cl > 0.0 && w.cl_mode != ClMode::off) {
    RatioLoss cl;
    switch (w.cl_mode) {
      case ClMode::support: cl = contrastive_loss(support, slabels); break;
      case ClMode::query: cl = contrastive_loss(query, qlabels); break;
      default: {
        std::vector<std::size_t> all(slabels);
        all.insert(all.end(), qlabels.begin(), qlabels.end());
        cl = contrastive_loss(embeddings, all);
      }
    }
    out.cl = cl.value.value().item();
    out.total = num::add(out.total, num::scale(cl.value, w.lambda_cl));
  }
  out.probs = log_probs.value();
  for (auto& v : out.probs.values()) v = std::exp(v);
  return out;
}

NumArray predict(const episodes::Episode& episode, const ModelParams& params, bool use_cross_attention) {
  num::Tape tape;
  const auto vars = bind(tape, params, false);
  LossConfig cfg;
  cfg.weights = {1.0, 0.0, 0.0, ClMode::off};
  cfg.use_cross_attention = use_cross_attention;
  return episode_loss(episode, vars, params.config, cfg).probs;
}

}  // namespace protocacl::model
