#include "protocacl/data/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "protocacl/errors.hpp"

namespace protocacl::data {

using nlohmann::json;

void validate(const Sample& s) {
  const auto n = s.tokens.size();
  auto check = [&](const Span& span, const char* which) {
    if (!(span.start < span.end && span.end <= n)) {
      throw ContractError(std::string(which) + " span [" + std::to_string(span.start) + ", " +
                          std::to_string(span.end) + ") invalid for " + std::to_string(n) +
                          " tokens (relation " + s.relation + ")");
    }
  };
  check(s.head, "head");
  check(s.tail, "tail");
}

void Dataset::add(Sample sample) {
  validate(sample);
  auto key = sample.relation;
  relations_[key].push_back(std::move(sample));
}

std::vector<std::string> Dataset::relation_ids() const {
  std::vector<std::string> ids;
  ids.reserve(relations_.size());
  for (const auto& [id, _] : relations_) ids.push_back(id);
  return ids;
}

std::size_t Dataset::num_samples() const {
  std::size_t n = 0;
  for (const auto& [_, samples] : relations_) n += samples.size();
  return n;
}

namespace {

Span entity_span(const json& entity, std::size_t num_tokens, const std::string& where) {
  if (!entity.is_array() || entity.size() < 3 || !entity[2].is_array() || entity[2].empty() ||
      !entity[2][0].is_array() || entity[2][0].empty()) {
    throw std::runtime_error(where + ": entity must be [name, id, [[indices...]]]");
  }
  const auto& first = entity[2][0];
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& idx : first) {
    if (!idx.is_number_integer() || idx.get<long long>() < 0) {
      throw std::runtime_error(where + ": entity index must be a nonnegative integer");
    }
    const auto v = idx.get<std::size_t>();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi >= num_tokens) {
    throw std::runtime_error(where + ": entity index " + std::to_string(hi) + " out of range for " +
                             std::to_string(num_tokens) + " tokens");
  }
  return {lo, hi + 1};
}

}  // namespace

Dataset parse_fewrel(const json& doc, const std::string& source) {
  if (!doc.is_object()) throw ParseError(source, 0, "top level must map relation ids to instance arrays");
  Dataset dataset;
  for (const auto& [relation, instances] : doc.items()) {
    if (!instances.is_array()) {
      throw ParseError(source, 0, "relation " + relation + ": instances must be an array");
    }
    if (instances.empty()) throw ParseError(source, 0, "relation " + relation + ": no instances");
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto& inst = instances[i];
      const auto where = "relation " + relation + " instance " + std::to_string(i);
      try {
        if (!inst.is_object() || !inst.contains("tokens") || !inst["tokens"].is_array()) {
          throw std::runtime_error(where + ": missing tokens array");
        }
        Sample s;
        s.relation = relation;
        s.tokens = inst["tokens"].get<std::vector<std::string>>();
        if (s.tokens.empty()) throw std::runtime_error(where + ": empty token list");
        if (!inst.contains("h") || !inst.contains("t")) throw std::runtime_error(where + ": missing h or t");
        s.head = entity_span(inst["h"], s.tokens.size(), where + " (h)");
        s.tail = entity_span(inst["t"], s.tokens.size(), where + " (t)");
        dataset.add(std::move(s));
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception& e) {
        throw ParseError(source, 0, e.what());
      }
    }
  }
  return dataset;
}

Dataset load_fewrel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, std::string("malformed JSON: ") + e.what());
  }
  return parse_fewrel(doc, path.string());
}

json to_fewrel_json(const Dataset& dataset) {
  json doc = json::object();
  for (const auto& [relation, samples] : dataset.relations()) {
    json arr = json::array();
    std::size_t k = 0;
    for (const auto& s : samples) {
      auto entity = [&](const Span& span, const char* role) {
        std::string name;
        json idx = json::array();
        for (auto i = span.start; i < span.end; ++i) {
          if (i > span.start) name += ' ';
          name += s.tokens[i];
          idx.push_back(i);
        }
        return json::array({name, relation + "_" + role + std::to_string(k), json::array({idx})});
      };
      arr.push_back({{"tokens", s.tokens}, {"h", entity(s.head, "h")}, {"t", entity(s.tail, "t")}});
      ++k;
    }
    doc[relation] = std::move(arr);
  }
  return doc;
}

void save_fewrel(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_fewrel_json(dataset).dump() << '\n';
}

}  // namespace protocacl::data
