#include "protocacl/training/grid.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "protocacl/errors.hpp"
#include "protocacl/random.hpp"
#include "protocacl/training/evaluate.hpp"

namespace protocacl::training {

const std::vector<std::string> kGridColumns = {
    "cell_id", "N1", "K1", "N2", "K2", "q_per_class", "model_variant", "iterations",
    "seed", "accuracy_mean", "accuracy_std", "wall_seconds", "status"};

std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, "init"); }

void GridSpec::validate() const {
  std::set<std::string> seen;
  for (const auto& c : cells) {
    if (c.id.empty()) throw ConfigError("cell_id", "must not be empty");
    if (!seen.insert(c.id).second) throw ConfigError("cell_id", "duplicate id " + c.id);
    c.config.validate();
  }
  for (const auto& a : axes) {
    if (a != "N1" && a != "K1" && a != "N2" && a != "K2") throw ConfigError("axes", "unknown axis " + a);
  }
}

model::LossConfig variant_loss(const std::string& variant) {
  const auto v = model::parse_variant(variant);
  if (!v) throw ConfigError("model.variant", "unknown variant " + variant);
  return model::variant_config(*v);
}

namespace {

std::string train_key(const TrainConfig& c) {
  const auto& t = c.plan.train;
  const auto& w = c.loss.weights;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu/%zu/%zu/%.17g|%zu|%.17g/%.17g/%.17g|%llu|%.17g/%.17g/%.17g/%d|%d/%d",
                t.n_way, t.k_shot, t.q_per_class, t.query_skew, c.iterations, c.optimizer.learning_rate,
                c.optimizer.weight_decay, c.optimizer.grad_clip.value_or(-1.0),
                static_cast<unsigned long long>(c.seed), w.lambda_ce, w.lambda_dist, w.lambda_cl,
                static_cast<int>(w.cl_mode), c.loss.use_cross_attention ? 1 : 0,
                static_cast<int>(c.loss.dist_metric));
  return buf;
}

GridRow row_skeleton(const GridCell& cell) {
  GridRow r;
  r.cell_id = cell.id;
  r.n1 = cell.config.plan.train.n_way;
  r.k1 = cell.config.plan.train.k_shot;
  r.n2 = cell.config.plan.infer.n_way;
  r.k2 = cell.config.plan.infer.k_shot;
  r.q_per_class = cell.config.plan.infer.q_per_class;
  r.model_variant = cell.variant;
  r.iterations = cell.config.iterations;
  r.seed = cell.config.seed;
  return r;
}

void fail(GridRow& row, const std::string& what) {
  row.status = "error: " + what;
  row.accuracy_mean = std::numeric_limits<double>::quiet_NaN();
  row.accuracy_std = std::numeric_limits<double>::quiet_NaN();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::vector<GridRow> run_grid(const GridContext& ctx, const GridSpec& spec, std::size_t jobs) {
  if (!ctx.train_data || !ctx.vocab || !ctx.table) throw ContractError("run_grid: incomplete context");
  std::set<std::string> seen;
  for (const auto& c : spec.cells) {
    if (!seen.insert(c.id).second) throw ConfigError("cell_id", "duplicate id " + c.id);
  }
  const auto& eval_data = ctx.eval_data ? *ctx.eval_data : *ctx.train_data;

  std::vector<GridRow> rows;
  rows.reserve(spec.cells.size());
  for (const auto& c : spec.cells) rows.push_back(row_skeleton(c));

  // Cells sharing a training configuration, in first-appearance order.
  std::map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < spec.cells.size(); ++i) {
    const auto key = train_key(spec.cells[i].config);
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  auto run_group = [&](const std::vector<std::size_t>& members) {
    const auto& first = spec.cells[members.front()].config;
    const auto t0 = Clock::now();
    std::optional<model::ModelParams> params;
    std::string failure;
    try {
      first.validate();
      auto init = model::init_params(ctx.encoder, *ctx.vocab, *ctx.table, init_seed(first.seed));
      params = train(*ctx.train_data, std::move(init), first).params;
    } catch (const std::exception& e) {
      failure = e.what();
    }
    const double train_seconds = seconds_since(t0);
    for (std::size_t i : members) {
      auto& row = rows[i];
      const auto& cfg = spec.cells[i].config;
      if (!params) {
        fail(row, failure);
        row.wall_seconds = train_seconds;
        continue;
      }
      const auto t1 = Clock::now();
      try {
        cfg.validate();
        const auto report = evaluate(eval_data, *params, cfg.plan.infer, cfg.eval_iterations,
                                     eval_stream_seed(cfg.seed), cfg.loss.use_cross_attention);
        row.accuracy_mean = report.accuracy_mean;
        row.accuracy_std = report.accuracy_std;
      } catch (const std::exception& e) {
        fail(row, e.what());
      }
      row.wall_seconds = train_seconds + seconds_since(t1);
    }
  };

  jobs = std::max<std::size_t>(1, std::min(jobs, groups.size()));
  if (jobs == 1) {
    for (const auto& g : groups) run_group(g);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (std::size_t g = next++; g < groups.size(); g = next++) run_group(groups[g]);
      });
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

namespace {

GridCell make_cell(const TrainConfig& base, const std::string& variant, std::size_t n1, std::size_t k1,
                   std::size_t n2, std::size_t k2) {
  GridCell c;
  c.variant = variant;
  c.config = base;
  c.config.loss = variant_loss(variant);
  c.config.plan.train.n_way = n1;
  c.config.plan.train.k_shot = k1;
  c.config.plan.infer.n_way = n2;
  c.config.plan.infer.k_shot = k2;
  c.id = variant + "-" + std::to_string(n1) + "-" + std::to_string(n2) + "-" + std::to_string(k1) + "-" +
         std::to_string(k2);
  return c;
}

}  // namespace

GridSpec table2_spec(const TrainConfig& base, const std::vector<std::string>& variants, std::size_t n) {
  GridSpec spec;
  spec.axes = {"K1", "K2"};
  for (const auto& v : variants) {
    for (std::size_t k1 : {5, 10, 20}) {
      for (std::size_t k2 : {1, 5, 10, 20}) spec.cells.push_back(make_cell(base, v, n, k1, n, k2));
    }
  }
  return spec;
}

GridSpec table3_spec(const TrainConfig& base, const std::vector<std::string>& variants) {
  GridSpec spec;
  spec.axes = {"N1", "N2"};
  for (const auto& v : variants) {
    for (std::size_t n1 : {5, 10, 20}) {
      for (std::size_t k : {5, 10}) {
        for (std::size_t n2 : {5, 10}) spec.cells.push_back(make_cell(base, v, n1, k, n2, k));
      }
    }
  }
  return spec;
}

GridSpec table4_spec(const TrainConfig& base) {
  GridSpec spec;
  for (auto v : {model::ModelVariant::proto, model::ModelVariant::proto_s, model::ModelVariant::proto_q,
                 model::ModelVariant::proto_s_and_q, model::ModelVariant::without_cl,
                 model::ModelVariant::protocacl}) {
    const auto& p = base.plan;
    spec.cells.push_back(make_cell(base, std::string(model::variant_name(v)), p.train.n_way, p.train.k_shot,
                                   p.infer.n_way, p.infer.k_shot));
  }
  return spec;
}

GridSpec replicate_seeds(const GridSpec& spec, const std::vector<std::uint64_t>& seeds) {
  GridSpec out;
  out.axes = spec.axes;
  for (const auto& c : spec.cells) {
    for (auto s : seeds) {
      auto copy = c;
      copy.config.seed = s;
      copy.id = c.id + "-s" + std::to_string(s);
      out.cells.push_back(std::move(copy));
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& source, std::size_t line, const std::string& column) {
  if constexpr (std::is_floating_point_v<T>) {
    if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
  }
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source, line, "bad value '" + s + "' in column " + column);
  }
  return v;
}

}  // namespace

void write_grid_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  for (std::size_t i = 0; i < kGridColumns.size(); ++i) out << (i ? "," : "") << kGridColumns[i];
  out << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.cell_id) << ',' << r.n1 << ',' << r.k1 << ',' << r.n2 << ',' << r.k2 << ','
        << r.q_per_class << ',' << csv_field(r.model_variant) << ',' << r.iterations << ',' << r.seed << ','
        << fmt(r.accuracy_mean) << ',' << fmt(r.accuracy_std) << ',' << fmt(r.wall_seconds) << ','
        << csv_field(r.status) << '\n';
  }
}

void write_grid_markdown(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "| cell | N1 | K1 | N2 | K2 | q | variant | iterations | seed | accuracy (%) | status |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    char acc[64];
    if (r.ok()) {
      std::snprintf(acc, sizeof acc, "%.2f ±%.2f", 100.0 * r.accuracy_mean, 100.0 * r.accuracy_std);
    } else {
      std::snprintf(acc, sizeof acc, "-");
    }
    out << "| " << r.cell_id << " | " << r.n1 << " | " << r.k1 << " | " << r.n2 << " | " << r.k2 << " | "
        << r.q_per_class << " | " << r.model_variant << " | " << r.iterations << " | " << r.seed << " | " << acc
        << " | " << r.status << " |\n";
  }
  out << "\n± is the standard deviation over evaluation episodes.\n";
}

std::vector<GridRow> read_grid_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty grid file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : kGridColumns) {
    if (name != "status" && !col.contains(name)) throw ParseError(source, 1, "missing column " + name);
  }
  std::vector<GridRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw ParseError(source, lineno, "wrong number of fields");
    auto get = [&](const std::string& name) -> const std::string& { return f[col.at(name)]; };
    auto size = [&](const std::string& name) { return parse_number<std::size_t>(get(name), source, lineno, name); };
    auto real = [&](const std::string& name) { return parse_number<double>(get(name), source, lineno, name); };
    GridRow r;
    r.cell_id = get("cell_id");
    r.n1 = size("N1");
    r.k1 = size("K1");
    r.n2 = size("N2");
    r.k2 = size("K2");
    r.q_per_class = size("q_per_class");
    r.model_variant = get("model_variant");
    r.iterations = size("iterations");
    r.seed = parse_number<std::uint64_t>(get("seed"), source, lineno, "seed");
    r.accuracy_mean = real("accuracy_mean");
    r.accuracy_std = real("accuracy_std");
    r.wall_seconds = real("wall_seconds");
    r.status = col.contains("status") ? get("status") : "ok";
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<GridRow> read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open grid file");
  return read_grid_csv(in, path.string());
}

}  // namespace protocacl::training
