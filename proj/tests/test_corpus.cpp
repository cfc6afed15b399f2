#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "attnscope/corpus.hpp"
#include "attnscope/rng.hpp"

using namespace attnscope;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path path = fs::temp_directory_path() / ("attnscope_test_" + name);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  return path;
}

}  // namespace

TEST_CASE("tokenize splits edge punctuation and lowercases") {
  CHECK(tokenize("Hello, world.") == std::vector<std::string>{"hello", ",", "world", "."});
  CHECK(tokenize("a b") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("  \t  ").empty());
  CHECK(tokenize("\"Quoted!?\"") == std::vector<std::string>{"\"", "quoted", "!", "?", "\""});
  CHECK(tokenize("don't") == std::vector<std::string>{"don't"});  // inner punctuation stays
  CHECK(tokenize("...") == std::vector<std::string>{".", ".", "."});
}

TEST_CASE("tokenize is idempotent on its own output") {
  Rng rng(123);
  const std::string alphabet = "abcXYZ.,!?\";: '\t";
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const std::size_t len = rng.uniform_index(30);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.uniform_index(alphabet.size())];
    const auto once = tokenize(s);
    CHECK(tokenize(join_tokens(once)) == once);
  }
}

TEST_CASE("vocab build: frequency order, ties, and eviction") {
  std::vector<SentencePair> corpus = {{{"a", "a", "b"}, {"a", "a", "b"}}};
  const Vocab v = Vocab::build(corpus, Vocab::Side::Source, 100);
  CHECK(v.encode("a") == 4);
  CHECK(v.encode("b") == 5);

  std::vector<SentencePair> tie = {{{"b", "a"}, {"b", "a"}}};
  const Vocab vt = Vocab::build(tie, Vocab::Side::Source, 100);
  CHECK(vt.encode("a") == 4);  // lexicographic tie break
  CHECK(vt.encode("b") == 5);

  const Vocab small = Vocab::build(corpus, Vocab::Side::Source, 5);
  CHECK(small.encode("a") == 4);
  CHECK(small.encode("b") == Vocab::kUnkId);

  CHECK_THROWS_AS(Vocab::build(corpus, Vocab::Side::Source, 4), ConfigError);
  CHECK_THROWS_AS(Vocab::build({}, Vocab::Side::Source, 100), ContractError);
}

TEST_CASE("vocab encode/decode round-trips in-vocabulary tokens") {
  const auto synth = synth_corpus(SynthSpec{40, 12, 5});
  const Vocab v = Vocab::build(synth.pairs, Vocab::Side::Target, 1000);
  for (const auto& pair : synth.pairs) {
    for (const std::string& tok : pair.target) {
      const int id = v.encode(tok);
      CHECK(id != Vocab::kUnkId);
      CHECK(v.token(id) == tok);
    }
  }
}

TEST_CASE("load_parallel prunes long pairs and reports drops") {
  std::string long_line;
  for (int i = 0; i < 51; ++i) long_line += "w ";
  const auto src = temp_file("p.src", "one two\n" + long_line + "\nshort line\n");
  const auto tgt = temp_file("p.tgt", "eins zwei\nok\nkurze zeile\n");

  const ParallelCorpus corpus = load_parallel(src.string(), tgt.string(), 50);
  CHECK(corpus.pairs.size() == 2);
  CHECK(corpus.dropped_too_long == 1);

  // never drops a pair with both sides within the limit
  for (const auto& p : corpus.pairs) {
    CHECK(p.source.size() <= 50);
    CHECK(p.target.size() <= 50);
  }
}

TEST_CASE("load_parallel: CRLF matches LF, misalignment and empties") {
  const auto lf_src = temp_file("lf.src", "Hello, world.\na b\n");
  const auto lf_tgt = temp_file("lf.tgt", "hallo welt\nc d\n");
  const auto crlf_src = temp_file("crlf.src", "Hello, world.\r\na b\r\n");
  const auto crlf_tgt = temp_file("crlf.tgt", "hallo welt\r\nc d\r\n");

  const auto a = load_parallel(lf_src.string(), lf_tgt.string(), 50);
  const auto b = load_parallel(crlf_src.string(), crlf_tgt.string(), 50);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].source == b.pairs[i].source);
    CHECK(a.pairs[i].target == b.pairs[i].target);
  }

  const auto uneven = temp_file("u.tgt", "only one line\n");
  try {
    load_parallel(lf_src.string(), uneven.string(), 50);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('1') != std::string::npos);
  }

  const auto empty_a = temp_file("e.src", "");
  const auto empty_b = temp_file("e.tgt", "");
  CHECK(load_parallel(empty_a.string(), empty_b.string(), 50).pairs.empty());

  const auto blank_src = temp_file("b.src", "a\n\n");
  const auto blank_tgt = temp_file("b.tgt", "x\ny\n");
  const auto blanks = load_parallel(blank_src.string(), blank_tgt.string(), 50);
  CHECK(blanks.pairs.size() == 1);
  CHECK(blanks.dropped_empty == 1);
}

TEST_CASE("synth corpus is deterministic and shaped by the grammar") {
  const SynthSpec spec{25, 10, 1};
  const auto a = synth_corpus(spec);
  const auto b = synth_corpus(spec);
  REQUIRE(a.pairs.size() == 25);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].source == b.pairs[i].source);
    CHECK(a.pairs[i].target == b.pairs[i].target);
    CHECK(a.target_classes[i] == b.target_classes[i]);
  }

  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    const auto& tgt = a.pairs[i].target;
    const auto& cls = a.target_classes[i];
    REQUIRE(tgt.size() == cls.size());
    CHECK(tgt.front() == kSynthLead);
    CHECK(tgt.back() == kSynthTerminator);
    CHECK(a.pairs[i].source.back() == kSynthTerminator);
    for (std::size_t j = 2; j + 1 < tgt.size(); j += 2) CHECK(tgt[j] == kSynthSep);
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      const bool function_like =
          tgt[j] == kSynthLead || tgt[j] == kSynthSep || tgt[j] == kSynthTerminator;
      CHECK(cls[j] == (function_like ? 'F' : 'C'));
    }
    // source word count matches mapped target content words
    const std::size_t content = static_cast<std::size_t>(
        std::count(cls.begin(), cls.end(), 'C'));
    CHECK(content == a.pairs[i].source.size() - 1);
    CHECK(content >= kSynthMinWords);
    CHECK(content <= kSynthMaxWords);
  }
}

TEST_CASE("synth word mapping is bijective") {
  const std::size_t n = 500;
  std::set<std::string> sources, targets;
  for (std::size_t i = 0; i < n; ++i) {
    sources.insert(synth_source_token(i));
    targets.insert(synth_target_token(i));
  }
  CHECK(sources.size() == n);
  CHECK(targets.size() == n);
  // the two alphabets do not collide with the function-like tokens
  for (const std::string& f : synth_function_tokens()) {
    CHECK(sources.count(f) == 0);
    CHECK(targets.count(f) == 0);
  }
}

TEST_CASE("synth corpus rejects bad specs") {
  CHECK_THROWS_AS(synth_corpus(SynthSpec{0, 10, 1}), ConfigError);
  CHECK_THROWS_AS(synth_corpus(SynthSpec{10, 0, 1}), ConfigError);
  CHECK_THROWS_AS(synth_corpus(SynthSpec{10, kSynthMaxContentVocab + 1, 1}), ConfigError);
}

TEST_CASE("synth pairs survive the write/tokenize round trip") {
  const auto corpus = synth_corpus(SynthSpec{30, 15, 9});
  for (const auto& pair : corpus.pairs) {
    CHECK(tokenize(join_tokens(pair.source)) == pair.source);
    CHECK(tokenize(join_tokens(pair.target)) == pair.target);
  }
}
