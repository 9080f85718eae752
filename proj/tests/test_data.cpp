#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "protocacl/data/dataset.hpp"
#include "protocacl/data/embeddings.hpp"
#include "protocacl/data/indexing.hpp"
#include "protocacl/data/synthetic.hpp"
#include "protocacl/errors.hpp"

using namespace protocacl;
using namespace protocacl::data;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "protocacl-test-data";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

json instance(std::vector<std::string> tokens, std::vector<int> h, std::vector<int> t) {
  return {{"tokens", tokens}, {"h", {"head", "Q1", {h}}}, {"t", {"tail", "Q2", {t}}}};
}

}  // namespace

TEST_CASE("parse_fewrel") {
  SUBCASE("one relation, one instance") {
    const json doc = {{"P17", {instance({"Paris", "is", "in", "big", "France"}, {0}, {3, 4})}}};
    const auto ds = parse_fewrel(doc);
    CHECK(ds.num_relations() == 1);
    CHECK(ds.num_samples() == 1);
    const auto& s = ds.relations().at("P17").front();
    CHECK(s.head == Span{0, 1});
    CHECK(s.tail == Span{3, 5});
    CHECK(s.relation == "P17");
  }
  SUBCASE("first mention list only, min to max+1") {
    json inst = instance({"a", "b", "c", "d", "e"}, {2, 1}, {4});
    inst["h"][2].push_back({0});
    const auto ds = parse_fewrel(json{{"P1", {inst}}});
    CHECK(ds.relations().at("P1").front().head == Span{1, 3});
  }
  SUBCASE("head index beyond the sentence names the relation") {
    const json doc = {{"P31", {instance({"a", "b"}, {0}, {1}), instance({"a", "b"}, {5}, {1})}}};
    try {
      parse_fewrel(doc, "train.json");
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("P31") != std::string::npos);
      CHECK(msg.find("train.json") != std::string::npos);
      CHECK(msg.find("instance 1") != std::string::npos);
    }
  }
  SUBCASE("malformed layouts") {
    CHECK_THROWS_AS(parse_fewrel(json::array()), ParseError);
    CHECK_THROWS_AS(parse_fewrel(json{{"P1", {{{"tokens", {"a"}}}}}}), ParseError);
    CHECK_THROWS_AS(parse_fewrel(json{{"P1", json::array()}}), ParseError);
  }
  SUBCASE("malformed file") {
    const auto p = scratch("broken.json");
    write_file(p, "{\"P1\": [");
    CHECK_THROWS_AS(load_fewrel(p), ParseError);
    CHECK_THROWS_AS(load_fewrel(scratch("missing.json")), ParseError);
  }
}

TEST_CASE("FewRel serialization round-trips counts and spans") {
  const auto synth = synth_generate({3, 7, 40, 9, 1.0, 5, 4, 0.0});
  const auto p = scratch("roundtrip.json");
  save_fewrel(synth.dataset, p);
  const auto back = load_fewrel(p);
  CHECK(back == synth.dataset);
  CHECK(back.num_samples() == 21);
}

TEST_CASE("load_embeddings") {
  SUBCASE("basic line") {
    const auto p = scratch("emb1.txt");
    write_file(p, "a 1.0 2.0\n");
    const auto table = load_embeddings(p, 2);
    CHECK(table.size() == 1);
    CHECK(table.lookup("a")[0] == 1.0);
    CHECK(table.lookup("a")[1] == 2.0);
  }
  SUBCASE("duplicates keep the first occurrence") {
    const auto p = scratch("emb2.txt");
    write_file(p, "a 1 2\nb 3 4\n\na 9 9\n");
    const auto table = load_embeddings(p, 2);
    CHECK(table.size() == 2);
    CHECK(table.lookup("a")[0] == 1.0);
  }
  SUBCASE("unseen token gives the zero oov vector") {
    const auto p = scratch("emb3.txt");
    write_file(p, "a 1 2\n");
    const auto table = load_embeddings(p, 2);
    const auto v = table.lookup("zzz");
    CHECK(v.size() == 2);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
  }
  SUBCASE("wrong arity reports the line") {
    const auto p = scratch("emb4.txt");
    write_file(p, "a 1 2\nb 3\n");
    try {
      load_embeddings(p, 2);
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    write_file(p, "a 1 2 x\n");
    CHECK_THROWS_AS(load_embeddings(p, 2), ParseError);
  }
  SUBCASE("save then load is exact") {
    EmbeddingTable t(3);
    const double v[] = {0.1, -1.0 / 3.0, 1e-300};
    t.insert("x", v);
    const auto p = scratch("emb5.txt");
    save_embeddings(t, p);
    const auto back = load_embeddings(p, 3);
    for (int i = 0; i < 3; ++i) CHECK(back.lookup("x")[i] == v[i]);
  }
}

TEST_CASE("synth_generate") {
  SynthConfig c{2, 10, 100, 12, 1.0, 7, 8, 0.0};
  const auto a = synth_generate(c);
  SUBCASE("structure and disjoint signatures") {
    CHECK(a.dataset.num_relations() == 2);
    std::vector<std::set<std::string>> sig(2);
    std::size_t r = 0;
    for (const auto& [rel, samples] : a.dataset.relations()) {
      CHECK(samples.size() == 10);
      for (const auto& s : samples) {
        CHECK(s.tokens.size() == 12);
        CHECK(s.head.end == s.head.start + 1);
        CHECK(s.tail.end == s.tail.start + 1);
        CHECK(s.head.start != s.tail.start);
        sig[r].insert(s.tokens[s.head.start]);
        sig[r].insert(s.tokens[s.tail.start]);
      }
      CHECK(sig[r].size() == 2);
      ++r;
    }
    for (const auto& t : sig[0]) CHECK_FALSE(sig[1].contains(t));
  }
  SUBCASE("deterministic") {
    const auto b = synth_generate(c);
    CHECK(a.dataset == b.dataset);
    for (const auto& t : a.embeddings.tokens()) {
      const auto x = a.embeddings.lookup(t);
      const auto y = b.embeddings.lookup(t);
      CHECK(std::equal(x.begin(), x.end(), y.begin()));
    }
  }
  SUBCASE("signal strength scales signature embeddings only") {
    c.signal_strength = 2.5;
    const auto s = synth_generate(c);
    auto norm = [&](const std::string& tok) {
      double sq = 0.0;
      for (double v : s.embeddings.lookup(tok)) sq += v * v;
      return std::sqrt(sq);
    };
    CHECK(norm(synth_token(0)) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(norm(synth_token(3)) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(norm(synth_token(4)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.embeddings.size() == 100);
  }
  SUBCASE("full dropout removes every signature token") {
    c.signature_dropout = 1.0;
    const auto s = synth_generate(c);
    for (const auto& [rel, samples] : s.dataset.relations()) {
      for (const auto& x : samples) {
        for (const auto& t : x.tokens) CHECK(std::stoul(t.substr(1)) >= 4);
      }
    }
  }
  SUBCASE("bad sizes") {
    CHECK_THROWS_AS(synth_generate({3, 10, 6, 12, 1.0, 7, 8, 0.0}), ConfigError);
    CHECK_THROWS_AS(synth_generate({2, 1, 100, 12, 1.0, 7, 8, 0.0}), ConfigError);
    CHECK_THROWS_AS(synth_generate({1, 10, 100, 12, 1.0, 7, 8, 0.0}), ConfigError);
  }
}

TEST_CASE("index_sample") {
  EmbeddingTable table(2);
  const double z[] = {0.0, 0.0};
  for (const char* t : {"a", "b", "c"}) table.insert(t, z);
  const auto vocab = Vocabulary::from_embeddings(table);
  CHECK(vocab.size() == 5);
  CHECK(vocab.id("a") == 2);
  CHECK(vocab.id("nope") == Vocabulary::kOov);

  SUBCASE("relative positions and padding") {
    const Sample s{{"A", "B", "C"}, {0, 1}, {2, 3}, "r"};
    const auto is = index_sample(s, vocab, {4, 40, true});
    REQUIRE(is);
    CHECK(is->head_rel_pos == std::vector<int>{0, 1, 2, 0});
    CHECK(is->tail_rel_pos == std::vector<int>{-2, -1, 0, 0});
    CHECK(is->token_ids == std::vector<std::size_t>{2, 3, 4, Vocabulary::kPad});
    CHECK(is->length == 3);
  }
  SUBCASE("case-sensitive lookup sends capitals to oov") {
    const Sample s{{"A", "b"}, {0, 1}, {1, 2}, "r"};
    const auto is = index_sample(s, vocab, {4, 40, false});
    CHECK(is->token_ids[0] == Vocabulary::kOov);
    CHECK(is->token_ids[1] == 3);
  }
  SUBCASE("clipping") {
    Sample s{std::vector<std::string>(60, "a"), {55, 56}, {0, 1}, "r"};
    const auto is = index_sample(s, vocab, {128, 40, true});
    CHECK(is->head_rel_pos[5] == -40);
    CHECK(is->head_rel_pos[55] == 0);
    CHECK(is->tail_rel_pos[55] == 40);
  }
  SUBCASE("entity beyond truncation is skipped") {
    const Sample s{{"a", "b", "c"}, {0, 1}, {2, 3}, "r"};
    CHECK_FALSE(index_sample(s, vocab, {2, 40, true}).has_value());
  }
  SUBCASE("invalid sample") {
    const Sample s{{"a"}, {0, 2}, {0, 1}, "r"};
    CHECK_THROWS_AS(index_sample(s, vocab, {4, 40, true}), ContractError);
  }
}

TEST_CASE("indexed synthetic samples have zero head offset at the head start") {
  const auto synth = synth_generate({4, 30, 60, 20, 1.0, 3, 5, 0.0});
  const auto vocab = Vocabulary::from_embeddings(synth.embeddings);
  const auto indexed = index_dataset(synth.dataset, vocab, {16, 40, true});
  std::size_t checked = 0;
  std::size_t r = 0;
  for (const auto& [rel, samples] : synth.dataset.relations()) {
    std::size_t k = 0;
    for (const auto& s : samples) {
      if (s.head.start >= 16 || s.tail.start >= 16) continue;
      const auto& is = indexed.samples[r][k++];
      CHECK(is.token_ids.size() == 16);
      CHECK(is.head_rel_pos.size() == 16);
      CHECK(is.tail_rel_pos.size() == 16);
      CHECK(is.head_rel_pos[s.head.start] == 0);
      CHECK(is.tail_rel_pos[s.tail.start] == 0);
      CHECK(is.label == r);
      ++checked;
    }
    ++r;
  }
  CHECK(checked + indexed.skipped == 120);
  CHECK(indexed.skipped > 0);
}

TEST_CASE("vocabulary filtered by datasets") {
  const auto synth = synth_generate({2, 3, 50, 4, 1.0, 1, 3, 0.0});
  const Dataset* filter[] = {&synth.dataset};
  const auto vocab = Vocabulary::from_embeddings(synth.embeddings, filter);
  CHECK(vocab.size() < 52);
  for (const auto& [rel, samples] : synth.dataset.relations()) {
    for (const auto& s : samples) {
      for (const auto& t : s.tokens) CHECK(vocab.id(t) >= 2);
    }
  }
}
