#include "protocacl/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "protocacl/errors.hpp"
#include "protocacl/model/losses.hpp"

namespace protocacl::cli {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read as size_t");

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Typed view of one config object that remembers which keys were read.
bool nonnegative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

class Section {
 public:
  Section(const json* obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (obj_ && !obj_->is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(has(key) ? &obj_->at(key) : nullptr, field(key));
  }

  void read(const std::string& key, std::size_t& out) {
    if (const auto* v = take(key)) {
      if (!nonnegative_integer(*v)) {
        throw ConfigError(field(key), "expected a nonnegative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const auto* v = take(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const auto* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const auto* v = take(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, std::filesystem::path& out) {
    std::string s = out.string();
    read(key, s);
    out = s;
  }
  void read(const std::string& key, std::optional<double>& out) {
    if (const auto* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw ConfigError(field(key), "expected a number or null");
      }
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) {
    if (const auto* v = take(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected a list of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError(field(key), "expected a list of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }
  void read(const std::string& key, std::vector<std::uint64_t>& out) {
    if (const auto* v = take(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected a list of nonnegative integers");
      out.clear();
      for (const auto& e : *v) {
        if (!nonnegative_integer(e)) throw ConfigError(field(key), "expected a list of nonnegative integers");
        out.push_back(e.get<std::uint64_t>());
      }
    }
  }

  const json* raw(const std::string& key) { return take(key); }

  // Rejects keys nobody asked for.
  void finish() const {
    if (!obj_) return;
    for (const auto& [key, _] : obj_->items()) {
      if (!used_.contains(key)) throw ConfigError(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json* take(const std::string& key) {
    used_.insert(key);
    return has(key) ? &obj_->at(key) : nullptr;
  }

  const json* obj_;
  std::string path_;
  std::set<std::string> used_;
};

// Re-homes an error raised by a nested validator under its dotted path.
ConfigError rehome(const std::string& field, const ConfigError& e) {
  std::string msg = e.what();
  const auto prefix = e.field() + ": ";
  if (msg.starts_with(prefix)) msg.erase(0, prefix.size());
  return ConfigError(field, msg);
}

std::string dotted(const std::string& field) {
  if (field == "iterations") return "train.iterations";
  if (field == "eval_iterations") return "eval.iterations";
  if (field == "learning_rate" || field == "weight_decay" || field == "grad_clip") return "optimizer." + field;
  if (field.starts_with("lambda")) return "model." + field;
  return field;
}

void read_episode(Section s, episodes::EpisodeConfig& e, std::size_t& iterations) {
  s.read("n_way", e.n_way);
  s.read("k_shot", e.k_shot);
  s.read("q_per_class", e.q_per_class);
  s.read("query_skew", e.query_skew);
  s.read("iterations", iterations);
  s.finish();
  try {
    e.validate();
  } catch (const ConfigError& err) {
    throw rehome(s.field(err.field()), err);
  }
}

json episode_json(const episodes::EpisodeConfig& e, std::size_t iterations) {
  return {{"n_way", e.n_way},
          {"k_shot", e.k_shot},
          {"q_per_class", e.q_per_class},
          {"query_skew", e.query_skew},
          {"iterations", iterations}};
}

void read_encoder(Section s, model::EncoderConfig& c) {
  s.read("word_dim", c.word_dim);
  s.read("pos_dim", c.pos_dim);
  s.read("hidden", c.hidden);
  s.read("window", c.window);
  s.read("pos_clip", c.pos_clip);
  s.read("max_len", c.max_len);
  s.finish();
}

json encoder_json(const model::EncoderConfig& c) {
  return {{"word_dim", c.word_dim}, {"pos_dim", c.pos_dim}, {"hidden", c.hidden},
          {"window", c.window},     {"pos_clip", c.pos_clip}, {"max_len", c.max_len}};
}

}  // namespace

json parse_config_text(const std::string& text, const std::string& source) {
  const auto body = trim(text);
  if (!body.empty() && body.front() == '{') {
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw ConfigError(source, std::string("invalid JSON: ") + e.what());
    }
  }
  json doc = json::object();
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto content = trim(line.substr(0, line.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno), "expected key = value");
    }
    const auto key = trim(content.substr(0, eq));
    const auto raw = trim(content.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno), "empty key");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError(key, "empty key segment");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      auto& next = (*node)[part];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) throw ConfigError(key.substr(0, dot), "is a value, not a section");
      node = &next;
      start = dot + 1;
    }
  }
  return doc;
}

RunConfig config_from_json(const json& doc) {
  RunConfig c;
  Section root(&doc, "");
  root.read("seed", c.train.seed);

  {
    auto data = root.child("data");
    const bool has_synth = data.has("synthetic");
    const bool has_fewrel = data.has("fewrel");
    if (has_synth == has_fewrel) {
      throw ConfigError("data", "exactly one of data.synthetic or data.fewrel is required");
    }
    if (has_synth) {
      auto s = data.child("synthetic");
      data::SynthConfig sc;
      s.read("num_relations", sc.num_relations);
      s.read("per_relation", sc.per_relation);
      s.read("vocab_size", sc.vocab_size);
      s.read("sentence_len", sc.sentence_len);
      s.read("signal_strength", sc.signal_strength);
      s.read("signature_dropout", sc.signature_dropout);
      s.read("seed", sc.seed);
      s.finish();
      c.synthetic = sc;
    } else {
      data.read("fewrel", c.fewrel_path);
      if (c.fewrel_path.empty()) throw ConfigError("data.fewrel", "path is empty");
    }
    data.read("fewrel_eval", c.fewrel_eval_path);
    data.read("lowercase", c.lowercase);
    data.finish();
  }
  {
    auto e = root.child("embeddings");
    e.read("path", c.embeddings_path);
    e.finish();
  }
  read_encoder(root.child("encoder"), c.encoder);
  read_episode(root.child("train"), c.train.plan.train, c.train.iterations);
  read_episode(root.child("eval"), c.train.plan.infer, c.train.eval_iterations);
  {
    auto o = root.child("optimizer");
    o.read("learning_rate", c.train.optimizer.learning_rate);
    o.read("weight_decay", c.train.optimizer.weight_decay);
    o.read("grad_clip", c.train.optimizer.grad_clip);
    o.finish();
  }
  {
    auto m = root.child("model");
    m.read("variant", c.variant);
    const auto v = model::parse_variant(c.variant);
    if (!v) throw ConfigError("model.variant", "unknown variant '" + c.variant + "'");
    auto& loss = c.train.loss;
    loss = model::variant_config(*v);
    m.read("lambda_ce", loss.weights.lambda_ce);
    m.read("lambda_dist", loss.weights.lambda_dist);
    m.read("lambda_cl", loss.weights.lambda_cl);
    std::string mode(model::cl_mode_name(loss.weights.cl_mode));
    m.read("cl_mode", mode);
    const auto parsed_mode = model::parse_cl_mode(mode);
    if (!parsed_mode) throw ConfigError("model.cl_mode", "unknown mode '" + mode + "'");
    loss.weights.cl_mode = *parsed_mode;
    m.read("use_cross_attention", loss.use_cross_attention);
    std::string metric(model::dist_metric_name(loss.dist_metric));
    m.read("dist_metric", metric);
    const auto parsed_metric = model::parse_dist_metric(metric);
    if (!parsed_metric) throw ConfigError("model.dist_metric", "unknown metric '" + metric + "'");
    loss.dist_metric = *parsed_metric;
    m.finish();
  }
  root.read("checkpoint", c.checkpoint);
  {
    auto g = root.child("grid");
    g.read("preset", c.grid.preset);
    g.read("variants", c.grid.variants);
    g.read("seeds", c.grid.seeds);
    g.read("n_way", c.grid.n_way);
    if (const auto* cells = g.raw("cells")) {
      if (!cells->is_array()) throw ConfigError("grid.cells", "expected a list");
      for (std::size_t i = 0; i < cells->size(); ++i) {
        Section cs(&(*cells)[i], "grid.cells[" + std::to_string(i) + "]");
        GridCellConfig cell;
        cs.read("id", cell.id);
        cs.read("variant", cell.variant);
        cs.read("n1", cell.n1);
        cs.read("k1", cell.k1);
        cs.read("n2", cell.n2);
        cs.read("k2", cell.k2);
        cs.finish();
        c.grid.cells.push_back(cell);
      }
    }
    g.finish();
  }
  {
    auto g = root.child("gradcheck");
    auto& gc = c.gradcheck;
    g.read("word_dim", gc.encoder.word_dim);
    g.read("pos_dim", gc.encoder.pos_dim);
    g.read("hidden", gc.encoder.hidden);
    g.read("window", gc.encoder.window);
    g.read("pos_clip", gc.encoder.pos_clip);
    g.read("max_len", gc.encoder.max_len);
    g.read("n_way", gc.episode.n_way);
    g.read("k_shot", gc.episode.k_shot);
    g.read("q_per_class", gc.episode.q_per_class);
    g.read("sentence_len", gc.sentence_len);
    g.read("vocab_size", gc.vocab_size);
    g.read("eps", gc.eps);
    g.read("tolerance", gc.tolerance);
    g.read("seed", gc.seed);
    g.finish();
  }
  root.read("output", c.output);
  root.read("formats", c.formats);
  root.read("jobs", c.jobs);
  root.finish();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (synthetic.has_value() == !fewrel_path.empty()) {
    throw ConfigError("data", "exactly one of data.synthetic or data.fewrel is required");
  }
  if (!fewrel_path.empty()) {
    if (!std::filesystem::exists(fewrel_path)) throw ConfigError("data.fewrel", "file not found: " + fewrel_path);
    if (embeddings_path.empty()) throw ConfigError("embeddings.path", "required with data.fewrel");
  }
  if (!fewrel_eval_path.empty() && !std::filesystem::exists(fewrel_eval_path)) {
    throw ConfigError("data.fewrel_eval", "file not found: " + fewrel_eval_path);
  }
  if (!embeddings_path.empty() && !std::filesystem::exists(embeddings_path)) {
    throw ConfigError("embeddings.path", "file not found: " + embeddings_path);
  }
  try {
    encoder.validate();
  } catch (const ConfigError& e) {
    throw rehome("encoder." + e.field(), e);
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw rehome(dotted(e.field()), e);
  }
  if (!model::parse_variant(variant)) throw ConfigError("model.variant", "unknown variant '" + variant + "'");
  if (grid.preset != "table2" && grid.preset != "table3" && grid.preset != "table4" && grid.preset != "custom") {
    throw ConfigError("grid.preset", "expected table2, table3, table4 or custom");
  }
  for (const auto& v : grid.variants) {
    if (!model::parse_variant(v)) throw ConfigError("grid.variants", "unknown variant '" + v + "'");
  }
  for (const auto& f : formats) {
    if (f != "csv" && f != "markdown" && f != "json") throw ConfigError("formats", "unknown format '" + f + "'");
  }
  if (formats.empty()) throw ConfigError("formats", "at least one format is required");
  if (jobs < 1) throw ConfigError("jobs", "must be at least 1");
  if (output.empty()) throw ConfigError("output", "must not be empty");
}

json config_to_json(const RunConfig& c) {
  json data = json::object();
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    data["synthetic"] = {{"num_relations", s.num_relations}, {"per_relation", s.per_relation},
                         {"vocab_size", s.vocab_size},       {"sentence_len", s.sentence_len},
                         {"signal_strength", s.signal_strength}, {"signature_dropout", s.signature_dropout},
                         {"seed", s.seed}};
  } else {
    data["fewrel"] = c.fewrel_path;
  }
  data["fewrel_eval"] = c.fewrel_eval_path;
  data["lowercase"] = c.lowercase;
  const auto& w = c.train.loss.weights;
  const auto& opt = c.train.optimizer;
  json cells = json::array();
  for (const auto& cell : c.grid.cells) {
    cells.push_back({{"id", cell.id}, {"variant", cell.variant}, {"n1", cell.n1}, {"k1", cell.k1},
                     {"n2", cell.n2}, {"k2", cell.k2}});
  }
  const auto& gc = c.gradcheck;
  return {{"seed", c.train.seed},
          {"data", data},
          {"embeddings", {{"path", c.embeddings_path}}},
          {"encoder", encoder_json(c.encoder)},
          {"train", episode_json(c.train.plan.train, c.train.iterations)},
          {"eval", episode_json(c.train.plan.infer, c.train.eval_iterations)},
          {"optimizer",
           {{"learning_rate", opt.learning_rate},
            {"weight_decay", opt.weight_decay},
            {"grad_clip", opt.grad_clip ? json(*opt.grad_clip) : json(nullptr)}}},
          {"model",
           {{"variant", c.variant},
            {"lambda_ce", w.lambda_ce},
            {"lambda_dist", w.lambda_dist},
            {"lambda_cl", w.lambda_cl},
            {"cl_mode", model::cl_mode_name(w.cl_mode)},
            {"use_cross_attention", c.train.loss.use_cross_attention},
            {"dist_metric", model::dist_metric_name(c.train.loss.dist_metric)}}},
          {"checkpoint", c.checkpoint},
          {"grid",
           {{"preset", c.grid.preset},
            {"variants", c.grid.variants},
            {"seeds", c.grid.seeds},
            {"n_way", c.grid.n_way},
            {"cells", cells}}},
          {"gradcheck",
           {{"word_dim", gc.encoder.word_dim},
            {"pos_dim", gc.encoder.pos_dim},
            {"hidden", gc.encoder.hidden},
            {"window", gc.encoder.window},
            {"pos_clip", gc.encoder.pos_clip},
            {"max_len", gc.encoder.max_len},
            {"n_way", gc.episode.n_way},
            {"k_shot", gc.episode.k_shot},
            {"q_per_class", gc.episode.q_per_class},
            {"sentence_len", gc.sentence_len},
            {"vocab_size", gc.vocab_size},
            {"eps", gc.eps},
            {"tolerance", gc.tolerance},
            {"seed", gc.seed}}},
          {"output", c.output.string()},
          {"formats", c.formats},
          {"jobs", c.jobs}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(parse_config_text(buf.str(), path.string()));
}

}  // namespace protocacl::cli
