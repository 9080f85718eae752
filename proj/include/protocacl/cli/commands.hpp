#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "protocacl/cli/config.hpp"
#include "protocacl/data/embeddings.hpp"
#include "protocacl/data/indexing.hpp"
#include "protocacl/training/trend.hpp"

namespace protocacl::cli {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitCheckFailed = 3 };

// Embeddings, vocabulary and indexed datasets for a run. `eval` is the
// evaluation pool: data.fewrel_eval when given, the training pool otherwise.
struct PreparedData {
  data::EmbeddingTable table{1};
  data::Vocabulary vocab;
  data::IndexedDataset train;
  data::IndexedDataset eval;
};

PreparedData prepare_data(const RunConfig& config);

// Each command writes its artifacts under config.output, logs to `out` and
// returns an exit code. Errors propagate as exceptions; see run_guarded.
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);  // checkpoint from config.checkpoint
int cmd_grid(const RunConfig& config, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);
int cmd_synth(const RunConfig& config, std::ostream& out);
int cmd_trend(const std::filesystem::path& table, training::TrendAxis axis, training::TrendDirection direction,
              const std::filesystem::path& output, std::ostream& out);

// Runs `command`, mapping ConfigError to 2 and every other exception to 1,
// with a one-line message on `err`.
int run_guarded(const std::function<int()>& command, std::ostream& err);

// Loss trace rows: iteration,l_ce,l_dist,l_cl,total with %.17g values.
void write_loss_trace(std::ostream& out, const std::vector<training::LossRecord>& trace);

}  // namespace protocacl::cli
