#include "protocacl/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "protocacl/data/dataset.hpp"
#include "protocacl/errors.hpp"
#include "protocacl/model/checkpoint.hpp"
#include "protocacl/training/evaluate.hpp"
#include "protocacl/training/grid.hpp"

namespace protocacl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path ensure_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output", "cannot create directory " + dir.string());
  const auto probe = dir / ".protoep-write-test";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output", "directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& doc) { open_out(path) << doc.dump(2) << '\n'; }

bool wants(const RunConfig& c, const std::string& format) {
  return std::find(c.formats.begin(), c.formats.end(), format) != c.formats.end();
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pct(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

// Synthetic data at the encoder's word dimension; errors name the config key.
data::SynthResult generate(const RunConfig& config) {
  auto sc = *config.synthetic;
  sc.embedding_dim = config.encoder.word_dim;
  try {
    return data::synth_generate(sc);
  } catch (const ConfigError& e) {
    const auto key = e.field() == "embedding_dim" ? "encoder.word_dim" : "data.synthetic." + e.field();
    std::string msg = e.what();
    msg.erase(0, e.field().size() + 2);
    throw ConfigError(key, msg);
  }
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
  PreparedData p;
  data::Dataset train_raw;
  std::optional<data::Dataset> eval_raw;
  if (config.synthetic) {
    auto synth = generate(config);
    train_raw = std::move(synth.dataset);
    p.table = std::move(synth.embeddings);
  } else {
    train_raw = data::load_fewrel(config.fewrel_path);
  }
  if (!config.fewrel_eval_path.empty()) eval_raw = data::load_fewrel(config.fewrel_eval_path);
  if (!config.embeddings_path.empty()) p.table = data::load_embeddings(config.embeddings_path, config.encoder.word_dim);
  if (p.table.dim() != config.encoder.word_dim) {
    throw ConfigError("encoder.word_dim", "does not match the embedding dimension " + std::to_string(p.table.dim()));
  }
  std::vector<const data::Dataset*> filter{&train_raw};
  if (eval_raw) filter.push_back(&*eval_raw);
  p.vocab = data::Vocabulary::from_embeddings(p.table, filter, config.lowercase);
  const data::IndexConfig ic{config.encoder.max_len, config.encoder.pos_clip, config.lowercase};
  p.train = data::index_dataset(train_raw, p.vocab, ic);
  p.eval = eval_raw ? data::index_dataset(*eval_raw, p.vocab, ic) : p.train;
  return p;
}

void write_loss_trace(std::ostream& out, const std::vector<training::LossRecord>& trace) {
  out << "iteration,l_ce,l_dist,l_cl,total\n";
  for (const auto& r : trace) {
    out << r.iteration << ',' << g17(r.ce) << ',' << g17(r.dist) << ',' << g17(r.cl) << ',' << g17(r.total)
        << '\n';
  }
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  config.validate();
  const auto dir = ensure_output(config.output);
  const auto data = prepare_data(config);
  out << "train: " << data.train.num_relations() << " relations, vocabulary " << data.vocab.size()
      << (data.train.skipped ? ", skipped " + std::to_string(data.train.skipped) + " samples" : "") << '\n';
  auto init = model::init_params(config.encoder, data.vocab, data.table, training::init_seed(config.train.seed));
  const std::size_t every = std::max<std::size_t>(1, config.train.iterations / 10);
  const auto result = training::train(data.train, std::move(init), config.train, [&](const training::LossRecord& r) {
    if ((r.iteration + 1) % every == 0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  iter %zu  ce %.4f  dist %.4f  cl %.4f  total %.4f\n", r.iteration + 1,
                    r.ce, r.dist, r.cl, r.total);
      out << buf << std::flush;
    }
  });
  const json meta = {{"variant", config.variant},
                     {"seed", config.train.seed},
                     {"iterations", config.train.iterations},
                     {"use_cross_attention", config.train.loss.use_cross_attention}};
  model::save_checkpoint(dir / "checkpoint.json", result.params, data.vocab, meta);
  {
    auto f = open_out(dir / "loss_trace.csv");
    write_loss_trace(f, result.trace);
  }
  write_json(dir / "config.json", config_to_json(config));
  out << "wrote " << (dir / "checkpoint.json").string() << ", " << (dir / "loss_trace.csv").string() << ", "
      << (dir / "config.json").string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  config.validate();
  if (config.checkpoint.empty()) throw ConfigError("checkpoint", "a checkpoint path is required");
  if (!fs::exists(config.checkpoint)) throw ConfigError("checkpoint", "file not found: " + config.checkpoint);
  const auto dir = ensure_output(config.output);
  const auto data = prepare_data(config);
  const auto ck = model::load_checkpoint(config.checkpoint);
  const auto expected = model::fingerprint(config.encoder, data.vocab);
  if (ck.fingerprint != expected) {
    throw ConfigError("checkpoint", "fingerprint mismatch: checkpoint has " + ck.fingerprint +
                                        ", configuration expects " + expected);
  }
  const auto& infer = config.train.plan.infer;
  const auto report = training::evaluate(data.eval, ck.params, infer, config.train.eval_iterations,
                                         training::eval_stream_seed(config.train.seed),
                                         config.train.loss.use_cross_attention, config.jobs);
  out << "eval: " << infer.n_way << "-way " << infer.k_shot << "-shot, " << report.episodes
      << " episodes: accuracy " << pct(report.accuracy_mean) << " ±" << pct(report.accuracy_std)
      << " (std over episodes)\n";
  if (wants(config, "json")) {
    write_json(dir / "eval_report.json",
               {{"accuracy_mean", report.accuracy_mean},
                {"accuracy_std", report.accuracy_std},
                {"std_over", "episodes"},
                {"episodes", report.episodes},
                {"n_way", infer.n_way},
                {"k_shot", infer.k_shot},
                {"q_per_class", infer.q_per_class},
                {"query_skew", infer.query_skew},
                {"seed", config.train.seed},
                {"use_cross_attention", report.use_cross_attention},
                {"checkpoint", config.checkpoint},
                {"fingerprint", ck.fingerprint}});
  }
  if (wants(config, "csv")) {
    auto f = open_out(dir / "eval_report.csv");
    f << "n_way,k_shot,q_per_class,episodes,seed,accuracy_mean,accuracy_std\n"
      << infer.n_way << ',' << infer.k_shot << ',' << infer.q_per_class << ',' << report.episodes << ','
      << config.train.seed << ',' << g17(report.accuracy_mean) << ',' << g17(report.accuracy_std) << '\n';
  }
  if (wants(config, "markdown")) {
    auto f = open_out(dir / "eval_report.md");
    f << "| N | K | q | episodes | accuracy (%) |\n|---|---|---|---|---|\n"
      << "| " << infer.n_way << " | " << infer.k_shot << " | " << infer.q_per_class << " | " << report.episodes
      << " | " << pct(report.accuracy_mean) << " ±" << pct(report.accuracy_std) << " |\n"
      << "\n± is the standard deviation over evaluation episodes.\n";
  }
  write_json(dir / "eval_config.json", config_to_json(config));
  return kExitOk;
}

namespace {

training::GridSpec build_grid(const RunConfig& config) {
  training::GridSpec spec;
  const auto& g = config.grid;
  if (g.preset == "table2") {
    spec = training::table2_spec(config.train, g.variants, g.n_way);
  } else if (g.preset == "table3") {
    spec = training::table3_spec(config.train, g.variants);
  } else if (g.preset == "table4") {
    spec = training::table4_spec(config.train);
  } else {
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      const auto& c = g.cells[i];
      training::GridCell cell;
      cell.variant = c.variant;
      cell.config = config.train;
      cell.config.loss = training::variant_loss(c.variant);
      cell.config.plan.train.n_way = c.n1;
      cell.config.plan.train.k_shot = c.k1;
      cell.config.plan.infer.n_way = c.n2;
      cell.config.plan.infer.k_shot = c.k2;
      cell.id = c.id.empty() ? "cell" + std::to_string(i) : c.id;
      spec.cells.push_back(std::move(cell));
    }
  }
  if (!g.seeds.empty()) spec = training::replicate_seeds(spec, g.seeds);
  spec.validate();
  return spec;
}

}  // namespace

int cmd_grid(const RunConfig& config, std::ostream& out) {
  config.validate();
  const auto spec = build_grid(config);
  const auto dir = ensure_output(config.output);
  const auto data = prepare_data(config);
  training::GridContext ctx;
  ctx.train_data = &data.train;
  ctx.eval_data = &data.eval;
  ctx.vocab = &data.vocab;
  ctx.table = &data.table;
  ctx.encoder = config.encoder;
  out << "grid: " << spec.cells.size() << " cells, preset " << config.grid.preset << ", jobs " << config.jobs
      << '\n';
  const auto rows = training::run_grid(ctx, spec, config.jobs);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.ok()) ++failed;
    out << "  " << r.cell_id << ": " << (r.ok() ? pct(r.accuracy_mean) + " ±" + pct(r.accuracy_std) : r.status)
        << '\n';
  }
  if (wants(config, "csv")) {
    auto f = open_out(dir / "grid.csv");
    training::write_grid_csv(f, rows);
  }
  if (wants(config, "markdown")) {
    auto f = open_out(dir / "grid.md");
    training::write_grid_markdown(f, rows);
  }
  if (wants(config, "json")) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"cell_id", r.cell_id}, {"N1", r.n1}, {"K1", r.k1}, {"N2", r.n2}, {"K2", r.k2},
                     {"q_per_class", r.q_per_class}, {"model_variant", r.model_variant},
                     {"iterations", r.iterations}, {"seed", r.seed},
                     {"accuracy_mean", r.ok() ? json(r.accuracy_mean) : json(nullptr)},
                     {"accuracy_std", r.ok() ? json(r.accuracy_std) : json(nullptr)},
                     {"wall_seconds", r.wall_seconds}, {"status", r.status}});
    }
    write_json(dir / "grid.json", arr);
  }
  write_json(dir / "grid_config.json", config_to_json(config));
  if (failed) out << "warning: " << failed << " cell(s) failed; see the status column\n";
  return kExitOk;
}

int cmd_trend(const fs::path& table, training::TrendAxis axis, training::TrendDirection direction,
              const fs::path& output, std::ostream& out) {
  if (!fs::exists(table)) throw ConfigError("table", "file not found: " + table.string());
  const auto rows = training::read_grid_csv(table);
  const auto report = training::trend_check(rows, axis, direction);
  const auto text = training::format_trend(report);
  out << text;
  if (!output.empty()) open_out(ensure_output(output) / "trend.txt") << text;
  return report.passed ? kExitOk : kExitCheckFailed;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = model::check_loss_gradients(config.gradcheck);
  bool ok = true;
  char buf[200];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%-9s max relative error %.3e over %zu coordinates  %s\n", e.name.c_str(),
                  e.result.max_relative_error, e.result.coordinates, e.passed ? "ok" : "FAIL");
    out << buf;
    ok = ok && e.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::snprintf(buf, sizeof buf, "tolerance %.1e, eps %.1e, %.2f s\n", config.gradcheck.tolerance,
                config.gradcheck.eps, secs);
  out << buf;
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_synth(const RunConfig& config, std::ostream& out) {
  if (!config.synthetic) throw ConfigError("data.synthetic", "synth needs a synthetic data source");
  const auto dir = ensure_output(config.output);
  const auto synth = generate(config);
  const auto data_path = dir / "synth_data.json";
  const auto emb_path = dir / "synth_embeddings.txt";
  data::save_fewrel(synth.dataset, data_path);
  data::save_embeddings(synth.embeddings, emb_path);
  // Same run, reading the dumped files instead of regenerating them.
  auto follow = config;
  follow.synthetic.reset();
  follow.fewrel_path = fs::absolute(data_path).string();
  follow.embeddings_path = fs::absolute(emb_path).string();
  write_json(dir / "synth_config.json", config_to_json(follow));
  out << "synth: " << synth.dataset.relation_ids().size() << " relations, " << synth.dataset.num_samples()
      << " samples, " << synth.embeddings.size() << " embeddings\nwrote " << data_path.string() << ", "
      << emb_path.string() << ", " << (dir / "synth_config.json").string() << '\n';
  return kExitOk;
}

int run_guarded(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace protocacl::cli
