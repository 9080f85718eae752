#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "protocacl/cli/commands.hpp"
#include "protocacl/cli/config.hpp"
#include "protocacl/errors.hpp"
#include "protocacl/training/grid.hpp"

using namespace protocacl;
using namespace protocacl::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "protocacl-test-cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tiny synthetic run: a few seconds end to end.
json tiny(const fs::path& out) {
  return {{"seed", 3},
          {"data", {{"synthetic", {{"num_relations", 6}, {"per_relation", 20}, {"vocab_size", 40}, {"sentence_len", 8}}}}},
          {"encoder", {{"word_dim", 6}, {"pos_dim", 2}, {"hidden", 8}, {"pos_clip", 4}, {"max_len", 10}}},
          {"train", {{"n_way", 3}, {"k_shot", 2}, {"q_per_class", 2}, {"iterations", 12}}},
          {"eval", {{"n_way", 3}, {"k_shot", 2}, {"q_per_class", 2}, {"iterations", 10}}},
          {"output", out.string()}};
}

int guarded(const std::function<int()>& f, std::string* message = nullptr) {
  std::ostringstream err;
  const int code = run_guarded(f, err);
  if (message) *message = err.str();
  return code;
}

std::string config_error_field(const json& doc) {
  try {
    config_from_json(doc).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("config text formats") {
  SUBCASE("key=value lines equal the JSON form") {
    const auto kv = parse_config_text(
        "# comment\n"
        "seed = 4\n"
        "data.fewrel = train.json\n"
        "embeddings.path = \"glove.txt\"\n"
        "train.iterations = 30000\n"
        "model.use_cross_attention = false\n"
        "grid.variants = [\"proto\", \"protocacl\"]\n");
    const json want = {{"seed", 4},
                       {"data", {{"fewrel", "train.json"}}},
                       {"embeddings", {{"path", "glove.txt"}}},
                       {"train", {{"iterations", 30000}}},
                       {"model", {{"use_cross_attention", false}}},
                       {"grid", {{"variants", {"proto", "protocacl"}}}}};
    CHECK(kv == want);
    CHECK(parse_config_text(want.dump()) == want);
  }
  SUBCASE("malformed text is a configuration error") {
    CHECK_THROWS_AS(parse_config_text("seed 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("{\"seed\": }"), ConfigError);
  }
}

TEST_CASE("config validation names the offending field") {
  const auto out = scratch("validation");
  CHECK(config_error_field(tiny(out)).empty());

  auto doc = tiny(out);
  doc["model"] = {{"lamda_cl", 0.1}};
  CHECK(config_error_field(doc) == "model.lamda_cl");

  doc = tiny(out);
  doc["data"] = {{"fewrel", (out / "missing.json").string()}};
  doc["embeddings"] = {{"path", (out / "missing.txt").string()}};
  CHECK(config_error_field(doc) == "data.fewrel");

  doc = tiny(out);
  doc["data"]["fewrel"] = "x.json";
  CHECK(config_error_field(doc) == "data");

  doc = tiny(out);
  doc["train"]["k_shot"] = 0;
  CHECK(config_error_field(doc).starts_with("train"));

  doc = tiny(out);
  doc["optimizer"] = {{"learning_rate", -0.5}};
  CHECK(config_error_field(doc) == "optimizer.learning_rate");

  doc = tiny(out);
  doc["formats"] = {"csv", "xml"};
  CHECK(config_error_field(doc) == "formats");

  doc = tiny(out);
  doc["model"] = {{"variant", "maml"}};
  CHECK(config_error_field(doc) == "model.variant");

  doc = tiny(out);
  doc["jobs"] = 0;
  CHECK(config_error_field(doc) == "jobs");
}

TEST_CASE("config round trip and paper-scale settings") {
  const auto out = scratch("roundtrip");
  auto doc = tiny(out);
  doc["train"]["iterations"] = 30000;
  doc["eval"]["iterations"] = 10000;
  doc["model"] = {{"variant", "proto_q"}, {"dist_metric", "symmetric_kl"}};
  doc["optimizer"] = {{"grad_clip", nullptr}};
  const auto c = config_from_json(doc);
  CHECK_NOTHROW(c.validate());
  CHECK(c.train.iterations == 30000);
  CHECK(c.train.eval_iterations == 10000);
  CHECK(c.train.loss.weights.cl_mode == model::ClMode::query);
  CHECK(c.train.loss.dist_metric == model::DistMetric::symmetric_kl);
  CHECK_FALSE(c.train.optimizer.grad_clip.has_value());
  const auto echoed = config_to_json(c);
  CHECK(config_to_json(config_from_json(echoed)) == echoed);
}

TEST_CASE("synthetic generator errors name the config key") {
  const auto out = scratch("synth-error");
  auto doc = tiny(out);
  doc["data"]["synthetic"]["num_relations"] = 1;
  std::ostringstream log;
  try {
    prepare_data(config_from_json(doc));
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "data.synthetic.num_relations");
  }
}

TEST_CASE("run_guarded exit codes") {
  std::string msg;
  CHECK(guarded([] { return kExitOk; }) == 0);
  CHECK(guarded([]() -> int { throw ConfigError("jobs", "must be at least 1"); }, &msg) == 2);
  CHECK(msg.find("jobs") != std::string::npos);
  CHECK(guarded([]() -> int { throw std::runtime_error("disk full"); }, &msg) == 1);
  CHECK(msg.find("disk full") != std::string::npos);
  CHECK(guarded([] { return kExitCheckFailed; }) == 3);
}

TEST_CASE("train, eval and synth pipeline") {
  const auto out = scratch("pipeline");
  const auto cfg = config_from_json(tiny(out / "a"));
  std::ostringstream log;
  REQUIRE(cmd_train(cfg, log) == 0);
  for (const char* f : {"checkpoint.json", "loss_trace.csv", "config.json"}) CHECK(fs::exists(out / "a" / f));
  const auto trace = slurp(out / "a" / "loss_trace.csv");
  CHECK(trace.starts_with("iteration,l_ce,l_dist,l_cl,total\n"));
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 13);

  SUBCASE("identical configs give byte-identical traces and checkpoints") {
    const auto again = config_from_json(tiny(out / "b"));
    REQUIRE(cmd_train(again, log) == 0);
    CHECK(slurp(out / "b" / "loss_trace.csv") == trace);
    CHECK(slurp(out / "b" / "checkpoint.json") == slurp(out / "a" / "checkpoint.json"));
  }
  SUBCASE("the echoed config reproduces the run") {
    auto echoed = load_config(out / "a" / "config.json");
    echoed.output = out / "c";
    REQUIRE(cmd_train(echoed, log) == 0);
    CHECK(slurp(out / "c" / "loss_trace.csv") == trace);
  }
  SUBCASE("eval reads the checkpoint") {
    auto doc = tiny(out / "eval");
    doc["checkpoint"] = (out / "a" / "checkpoint.json").string();
    REQUIRE(cmd_eval(config_from_json(doc), log) == 0);
    const auto report = json::parse(slurp(out / "eval" / "eval_report.json"));
    CHECK(report["episodes"] == 10);
    CHECK(report["accuracy_mean"].get<double>() >= 0.0);
    CHECK(report["std_over"] == "episodes");
    CHECK(fs::exists(out / "eval" / "eval_report.csv"));
    CHECK(fs::exists(out / "eval" / "eval_report.md"));
  }
  SUBCASE("a checkpoint from another vocabulary is refused with exit 2") {
    auto doc = tiny(out / "mismatch");
    doc["data"]["synthetic"]["vocab_size"] = 50;
    doc["checkpoint"] = (out / "a" / "checkpoint.json").string();
    std::string msg;
    CHECK(guarded([&] { return cmd_eval(config_from_json(doc), log); }, &msg) == 2);
    CHECK(msg.find("fingerprint mismatch") != std::string::npos);
  }
  SUBCASE("synth dumps FewRel JSON that trains like the generated data") {
    auto doc = tiny(out / "synth");
    REQUIRE(cmd_synth(config_from_json(doc), log) == 0);
    const auto raw = json::parse(slurp(out / "synth" / "synth_data.json"));
    REQUIRE(raw.is_object());
    const auto& first = raw.begin().value()[0];
    CHECK(first.contains("tokens"));
    CHECK(first["h"].size() == 3);
    auto follow = load_config(out / "synth" / "synth_config.json");
    CHECK(follow.fewrel_path.ends_with("synth_data.json"));
    follow.output = out / "from-files";
    REQUIRE(cmd_train(follow, log) == 0);
    CHECK(slurp(out / "from-files" / "loss_trace.csv") == trace);
  }
}

TEST_CASE("gradcheck command") {
  RunConfig cfg;
  cfg.synthetic = data::SynthConfig{};
  std::ostringstream log;
  CHECK(cmd_gradcheck(cfg, log) == 0);
  for (const char* name : {"ce", "dist", "cl", "combined"}) CHECK(log.str().find(name) != std::string::npos);
  CHECK(log.str().find("FAIL") == std::string::npos);
}

TEST_CASE("grid and trend commands") {
  const auto out = scratch("grid");
  auto doc = tiny(out / "t3");
  doc["data"]["synthetic"]["num_relations"] = 20;
  doc["data"]["synthetic"]["per_relation"] = 14;
  doc["data"]["synthetic"]["vocab_size"] = 80;
  doc["train"] = {{"q_per_class", 2}, {"iterations", 2}};
  doc["eval"] = {{"q_per_class", 2}, {"iterations", 2}};
  doc["grid"] = {{"preset", "table3"}};
  doc["formats"] = {"csv", "markdown", "json"};
  std::ostringstream log;
  REQUIRE(cmd_grid(config_from_json(doc), log) == 0);
  const auto rows = training::read_grid_csv(out / "t3" / "grid.csv");
  CHECK(rows.size() == 12);
  for (const auto& r : rows) CHECK(r.ok());
  CHECK(fs::exists(out / "t3" / "grid.md"));
  CHECK(fs::exists(out / "t3" / "grid.json"));

  SUBCASE("trend over the written table") {
    const int code = cmd_trend(out / "t3" / "grid.csv", training::TrendAxis::n2, training::TrendDirection::decreasing,
                               out / "trend", log);
    CHECK((code == 0 || code == 3));
    CHECK(fs::exists(out / "trend" / "trend.txt"));
    std::string msg;
    CHECK(guarded([&] {
            return cmd_trend(out / "nope.csv", training::TrendAxis::n2, training::TrendDirection::decreasing, "", log);
          }, &msg) == 2);
  }
  SUBCASE("custom cells with a failing one still exit 0") {
    auto c = tiny(out / "custom");
    c["grid"] = {{"preset", "custom"},
                 {"cells", {{{"id", "ok"}, {"variant", "proto"}, {"n1", 3}, {"k1", 2}, {"n2", 3}, {"k2", 2}},
                            {{"id", "too-many"}, {"variant", "proto"}, {"n1", 3}, {"k1", 2}, {"n2", 9}, {"k2", 2}}}}};
    REQUIRE(cmd_grid(config_from_json(c), log) == 0);
    const auto r = training::read_grid_csv(out / "custom" / "grid.csv");
    REQUIRE(r.size() == 2);
    CHECK(r[0].ok());
    CHECK_FALSE(r[1].ok());
  }
}
