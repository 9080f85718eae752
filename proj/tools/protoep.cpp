// protoep: train, evaluate and compare few-shot relation classifiers.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "protocacl/cli/commands.hpp"
#include "protocacl/cli/config.hpp"
#include "protocacl/errors.hpp"
#include "protocacl/numerics/allocator.hpp"

namespace pc = protocacl::cli;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  std::string formats;
  std::string checkpoint;
};

std::optional<std::size_t> env_jobs() {
  const char* v = std::getenv("PROTOEP_JOBS");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (pos != std::string(v).size() || n == 0) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw protocacl::ConfigError("PROTOEP_JOBS", std::string("expected a positive integer, got '") + v + "'");
  }
}

pc::RunConfig resolve(const Overrides& o) {
  if (o.config.empty()) throw protocacl::ConfigError("--config", "a config file is required");
  std::ifstream in(o.config);
  if (!in) throw protocacl::ConfigError("--config", "cannot read " + o.config);
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = pc::parse_config_text(buf.str(), o.config);
  if (!doc.is_object()) throw protocacl::ConfigError("--config", "expected an object");
  if (!o.out.empty()) doc["output"] = o.out;
  if (o.seed) doc["seed"] = *o.seed;
  if (!o.checkpoint.empty()) doc["checkpoint"] = o.checkpoint;
  if (!o.formats.empty()) {
    json list = json::array();
    std::stringstream ss(o.formats);
    for (std::string f; std::getline(ss, f, ',');) {
      if (!f.empty()) list.push_back(f);
    }
    doc["formats"] = list;
  }
  if (o.jobs) {
    doc["jobs"] = *o.jobs;
  } else if (const auto j = env_jobs()) {
    doc["jobs"] = *j;
  }
  return pc::config_from_json(doc);
}

void add_common(CLI::App* cmd, Overrides& o, bool config_required = true) {
  auto* c = cmd->add_option("--config,-c", o.config, "JSON or key=value config file");
  if (config_required) c->required();
  cmd->add_option("--out,-o", o.out, "output directory (overrides 'output')");
  cmd->add_option("--jobs,-j", o.jobs, "worker threads (fallback: PROTOEP_JOBS, then 'jobs')");
  cmd->add_option("--seed", o.seed, "run seed (overrides 'seed')");
  cmd->add_option("--format", o.formats, "comma-separated report formats: csv,markdown,json");
}

}  // namespace

int main(int argc, char** argv) {
  protocacl::num::retain_freed_memory();
  CLI::App app{"Episodic few-shot relation classification with ProtoNet and ProtoCACL"};
  app.require_subcommand(1);
  Overrides o;

  auto* train = app.add_subcommand("train", "train a model; writes checkpoint, loss trace and config echo");
  add_common(train, o);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on sampled episodes");
  add_common(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file (overrides 'checkpoint')");
  auto* grid = app.add_subcommand("grid", "train and evaluate every cell of an experiment grid");
  add_common(grid, o);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
  add_common(gradcheck, o, false);
  auto* synth = app.add_subcommand("synth", "dump a synthetic dataset and its embeddings");
  add_common(synth, o);

  std::string table, axis = "K2", direction = "increasing";
  auto* trend = app.add_subcommand("trend", "check a directional trend in a grid CSV");
  trend->add_option("--table,table", table, "grid CSV")->required();
  trend->add_option("--axis", axis, "N1, K1, N2 or K2")->check(CLI::IsMember({"N1", "K1", "N2", "K2"}));
  trend->add_option("--direction", direction, "increasing, decreasing, nonincreasing or nondecreasing")
      ->check(CLI::IsMember({"increasing", "decreasing", "nonincreasing", "nondecreasing"}));
  trend->add_option("--out,-o", o.out, "directory for trend.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pc::kExitConfig;
  }

  return pc::run_guarded(
      [&]() -> int {
        if (*train) return pc::cmd_train(resolve(o), std::cout);
        if (*eval) return pc::cmd_eval(resolve(o), std::cout);
        if (*grid) return pc::cmd_grid(resolve(o), std::cout);
        if (*synth) return pc::cmd_synth(resolve(o), std::cout);
        if (*gradcheck) {
          pc::RunConfig config;
          config.synthetic = protocacl::data::SynthConfig{};
          if (!o.config.empty()) config = resolve(o);
          return pc::cmd_gradcheck(config, std::cout);
        }
        return pc::cmd_trend(table, *protocacl::training::parse_axis(axis),
                             *protocacl::training::parse_direction(direction), o.out, std::cout);
      },
      std::cerr);
}
