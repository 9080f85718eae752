#include "protocacl/model/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "protocacl/errors.hpp"
#include "protocacl/random.hpp"

namespace protocacl::model {

using nlohmann::json;

std::string fingerprint(const EncoderConfig& c, const data::Vocabulary& vocab) {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : vocab.tokens()) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return "v" + std::to_string(kCheckpointVersion) + ":word_dim=" + std::to_string(c.word_dim) +
         ",pos_dim=" + std::to_string(c.pos_dim) + ",hidden=" + std::to_string(c.hidden) +
         ",window=" + std::to_string(c.window) + ",pos_clip=" + std::to_string(c.pos_clip) +
         ",max_len=" + std::to_string(c.max_len) + ",vocab=" + std::to_string(vocab.size()) + "/" + hex;
}

json checkpoint_to_json(const ModelParams& params, const data::Vocabulary& vocab, const json& metadata) {
  const auto& c = params.config;
  json arrays = json::array();
  for (const auto& [name, arr] : params.named()) {
    arrays.push_back({{"name", name}, {"shape", arr->shape()}, {"values", arr->data()}});
  }
  return {{"format", "protoep-checkpoint"},
          {"version", kCheckpointVersion},
          {"fingerprint", fingerprint(c, vocab)},
          {"encoder",
           {{"word_dim", c.word_dim},
            {"pos_dim", c.pos_dim},
            {"hidden", c.hidden},
            {"window", c.window},
            {"pos_clip", c.pos_clip},
            {"max_len", c.max_len}}},
          {"vocab", vocab.tokens()},
          {"metadata", metadata},
          {"arrays", std::move(arrays)}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.at("format") != "protoep-checkpoint") throw ParseError("checkpoint", 0, "not a checkpoint");
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("checkpoint", 0, "unsupported version " + doc.at("version").dump());
    }
    Checkpoint ck;
    auto& c = ck.params.config;
    const auto& e = doc.at("encoder");
    c.word_dim = e.at("word_dim");
    c.pos_dim = e.at("pos_dim");
    c.hidden = e.at("hidden");
    c.window = e.at("window");
    c.pos_clip = e.at("pos_clip");
    c.max_len = e.at("max_len");
    ck.vocab = data::Vocabulary(doc.at("vocab").get<std::vector<std::string>>());
    ck.fingerprint = doc.at("fingerprint");
    ck.metadata = doc.value("metadata", json::object());
    auto named = ck.params.named();
    const auto& arrays = doc.at("arrays");
    if (arrays.size() != named.size()) throw ParseError("checkpoint", 0, "wrong number of arrays");
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto& a = arrays[i];
      if (a.at("name") != named[i].first) {
        throw ParseError("checkpoint", 0, "expected array " + named[i].first + ", got " + a.at("name").dump());
      }
      *named[i].second = num::NumArray(a.at("shape").get<num::Shape>(), a.at("values").get<std::vector<double>>());
    }
    if (fingerprint(c, ck.vocab) != ck.fingerprint) {
      throw ParseError("checkpoint", 0, "stored fingerprint does not match its own contents");
    }
    return ck;
  } catch (const json::exception& ex) {
    throw ParseError("checkpoint", 0, ex.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const data::Vocabulary& vocab,
                     const json& metadata) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(params, vocab, metadata).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open checkpoint");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace protocacl::model
