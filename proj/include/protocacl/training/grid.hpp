#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "protocacl/data/embeddings.hpp"
#include "protocacl/data/indexing.hpp"
#include "protocacl/model/params.hpp"
#include "protocacl/training/trainer.hpp"

namespace protocacl::training {

struct GridCell {
  std::string id;
  std::string variant;  // label for the model_variant column
  TrainConfig config;
};

struct GridSpec {
  std::vector<GridCell> cells;
  std::vector<std::string> axes;  // subset of N1, K1, N2, K2 that varies

  void validate() const;  // unique ids, valid configs
};

// Shared read-only inputs for every cell.
struct GridContext {
  const data::IndexedDataset* train_data = nullptr;
  const data::IndexedDataset* eval_data = nullptr;  // null: evaluate on train_data
  const data::Vocabulary* vocab = nullptr;
  const data::EmbeddingTable* table = nullptr;
  model::EncoderConfig encoder;
};

struct GridRow {
  std::string cell_id;
  std::size_t n1 = 0, k1 = 0, n2 = 0, k2 = 0, q_per_class = 0;
  std::string model_variant;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double wall_seconds = 0.0;
  std::string status = "ok";  // "ok" or "error: <message>"

  bool ok() const { return status == "ok"; }
};

// Trains and evaluates every cell; rows come back in spec order. Cells whose
// training settings coincide (same train shape, iterations, optimizer, loss,
// seed) share one trained model. A failing cell is recorded in its row's
// status and leaves the others untouched. Results do not depend on `jobs`.
std::vector<GridRow> run_grid(const GridContext& context, const GridSpec& spec, std::size_t jobs = 1);

// Parameter initialisation and evaluation seeds derived from a cell's seed.
std::uint64_t init_seed(std::uint64_t seed);

// Inconsistent-K layout: K1 in {5,10,20} x K2 in {1,5,10,20} at N1 = N2 = n.
GridSpec table2_spec(const TrainConfig& base, const std::vector<std::string>& variants, std::size_t n = 5);
// Inconsistent-N layout: N1 in {5,10,20} x (K in {5,10}) x N2 in {5,10}, K1 = K2 = K.
GridSpec table3_spec(const TrainConfig& base, const std::vector<std::string>& variants);
// Ablation rows at the base plan: proto, proto_s, proto_q, proto_s_and_q, wo_cl, protocacl.
GridSpec table4_spec(const TrainConfig& base);
// One copy of every cell per seed; ids gain a "-s<seed>" suffix.
GridSpec replicate_seeds(const GridSpec& spec, const std::vector<std::uint64_t>& seeds);

// Loss settings for a variant label (ModelVariant names).
model::LossConfig variant_loss(const std::string& variant);

extern const std::vector<std::string> kGridColumns;

void write_grid_csv(std::ostream& out, const std::vector<GridRow>& rows);
void write_grid_markdown(std::ostream& out, const std::vector<GridRow>& rows);
std::vector<GridRow> read_grid_csv(std::istream& in, const std::string& source = "grid.csv");
std::vector<GridRow> read_grid_csv(const std::filesystem::path& path);

}  // namespace protocacl::training
