#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "attnscope/analysis.hpp"
#include "attnscope/heatmap.hpp"
#include "attnscope/report.hpp"
#include "test_support.hpp"

using namespace attnscope;
using attnscope::testing::RefModel;
using attnscope::testing::tiny_setup;

namespace {

std::vector<TranslationTrace> decode_corpus(const testing::TinySetup& s, std::size_t count) {
  std::vector<TranslationTrace> traces;
  for (std::size_t i = 0; i < count && i < s.pairs.size(); ++i) {
    traces.push_back(greedy_translate(s.params, s.src_vocab.encode_all(s.pairs[i].source),
                                      s.pairs[i].source));
  }
  return traces;
}

FunctionWordList synth_lexicon() {
  return FunctionWordList::from_tokens(synth_function_tokens(), "<synth>");
}

}  // namespace

TEST_CASE("identity substitution preserves every token") {
  const auto s = tiny_setup(5, 6, 8, 41, 6);
  for (const TranslationTrace& trace : decode_corpus(s, 5)) {
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      CHECK(check_preserved(s.params, trace, t, trace.steps[t].alpha));
    }
  }
}

TEST_CASE("zero substitution equals the zero-context projection") {
  const auto s = tiny_setup(4, 6, 8, 43, 6);
  const TranslationTrace trace = decode_corpus(s, 1).front();
  const std::size_t m = trace.encoder_states.size();
  NoGradGuard no_grad;
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const std::vector<double> zeros(m, 0.0);
    const Tensor logits =
        output_logits(s.params, Tensor::row(trace.steps[t].decoder_state),
                      Tensor::zeros({1, 2 * s.params.config.hidden_dim}));
    const bool want =
        static_cast<int>(argmax_lowest(logits.values())) == trace.steps[t].emitted;
    CHECK(check_preserved(s.params, trace, t, zeros) == want);
  }
}

TEST_CASE("check_preserved validates step, length, and provenance") {
  auto s = tiny_setup(4, 6, 8, 47, 6);
  const TranslationTrace trace = decode_corpus(s, 1).front();
  const std::vector<double> ok(trace.encoder_states.size(), 0.0);
  CHECK_THROWS_AS(check_preserved(s.params, trace, trace.steps.size(), ok), ContractError);
  CHECK_THROWS_AS(
      check_preserved(s.params, trace, 0, std::vector<double>(ok.size() + 1, 0.0)),
      DimensionError);

  // touching a weight after decode invalidates the trace
  s.params.out_b.mutable_values()[0] += 1.0;
  CHECK_THROWS_AS(check_preserved(s.params, trace, 0, ok), IntegrityError);
}

// The core cross-check: an independent forward pass, recomputed from
// scratch with the attention row overridden at exactly one step, must agree
// with the trace-replay shortcut, and later steps must be untouched.
TEST_CASE("trace replay agrees with the from-scratch forward oracle") {
  const auto s = tiny_setup(6, 6, 8, 53, 6);
  const RefModel ref(s.params);
  const AnalysisConfig config;

  std::size_t checked = 0;
  for (std::size_t sentence = 0; sentence < 3; ++sentence) {
    const std::vector<int> ids = s.src_vocab.encode_all(s.pairs[sentence].source);
    const TranslationTrace trace = greedy_translate(s.params, ids, s.pairs[sentence].source);
    const auto plain = ref.greedy(ids, trace.max_steps);
    REQUIRE(plain.size() == trace.steps.size());

    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      for (Method method : {Method::RandomPermute, Method::Uniform, Method::ZeroOutMax,
                            Method::ZeroOut, Method::LastEncoderState, Method::OnlyMax,
                            Method::KeepMaxUniformOthers}) {
        const MethodResult sub =
            build_method_substitution(s.params, trace, sentence, t, method, config);
        if (!sub.feasible) continue;

        const bool fast = check_preserved(s.params, trace, t, sub.weights);

        const testing::Vec alpha_override(sub.weights.begin(), sub.weights.end());
        const auto oracle = ref.greedy(ids, trace.max_steps, t, &alpha_override);
        REQUIRE(oracle.size() == plain.size());
        // isolation: the emitted sequence is identical with and without
        // the substitution
        for (std::size_t u = 0; u < oracle.size(); ++u) {
          CHECK(oracle[u].emitted == plain[u].emitted);
        }
        const auto& sub_logits = oracle[t].substituted_logits;
        REQUIRE(!sub_logits.empty());
        const bool slow = static_cast<int>(argmax_lowest(
                              std::span<const double>(sub_logits))) == trace.steps[t].emitted;
        CHECK(fast == slow);
        ++checked;
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("run_analysis: totals, union aggregate, and counterfactual bookkeeping") {
  const auto s = tiny_setup(8, 6, 8, 59, 6);
  const std::vector<TranslationTrace> traces = decode_corpus(s, 8);
  const std::vector<Method> all(kMethodOrder.begin(), kMethodOrder.end());
  const PreservationReport report =
      run_analysis(s.params, traces, all, s.tgt_vocab, synth_lexicon(), AnalysisConfig{});

  std::size_t expected_tokens = 0;
  for (const auto& t : traces) expected_tokens += t.steps.size();
  CHECK(report.total_tokens == expected_tokens);
  CHECK(report.function_tokens + report.content_tokens == report.total_tokens);
  CHECK(report.outcomes.size() == expected_tokens);
  REQUIRE(report.methods.size() == 8);

  const auto idx = [&](Method m) {
    return static_cast<std::size_t>(std::find(report.methods.begin(), report.methods.end(), m) -
                                    report.methods.begin());
  };

  for (const TokenOutcome& token : report.outcomes) {
    CHECK(token.results.size() == report.methods.size());
    const Outcome agg = token.results[idx(Method::Aggregate)].outcome;
    bool any_preserved = false, all_ncf = true;
    for (Method m : {Method::RandomPermute, Method::Uniform, Method::ZeroOutMax}) {
      const Outcome o = token.results[idx(m)].outcome;
      any_preserved = any_preserved || o == Outcome::Preserved;
      all_ncf = all_ncf && o == Outcome::NotCounterfactualizable;

      // a preserved token under a constrained method always carries a
      // moved argmax
      if (o == Outcome::Preserved) {
        CHECK(token.results[idx(m)].counterfactual);
        CHECK(token.results[idx(m)].alpha_argmax != token.original_argmax);
      }
    }
    if (any_preserved) {
      CHECK(agg == Outcome::Preserved);
    } else if (all_ncf) {
      CHECK(agg == Outcome::NotCounterfactualizable);
    } else {
      CHECK(agg == Outcome::NotPreserved);
    }
  }

  // union rates dominate the component rates, class by class
  const MethodStats* agg = report.stats_for(Method::Aggregate);
  REQUIRE(agg != nullptr);
  for (Method m : {Method::RandomPermute, Method::Uniform, Method::ZeroOutMax}) {
    const MethodStats* part = report.stats_for(m);
    REQUIRE(part != nullptr);
    CHECK(agg->function_words.preserved >= part->function_words.preserved);
    CHECK(agg->content_words.preserved >= part->content_words.preserved);
    CHECK(agg->function_words.rate() >= part->function_words.rate());
    CHECK(agg->content_words.rate() >= part->content_words.rate());
  }

  for (const MethodStats& stats : report.stats) {
    for (const ClassStats* cls :
         {&stats.function_words, &stats.content_words, &stats.all_tokens}) {
      CHECK(cls->rate() >= 0.0);
      CHECK(cls->rate() <= 1.0);
    }
    CHECK(stats.all_tokens.total() == report.total_tokens);
  }
}

TEST_CASE("single-token sources are counted as not counterfactualizable") {
  const auto s = tiny_setup(4, 6, 8, 61, 6);
  // one-token source: every attention row is [1.0]
  const TranslationTrace trace = greedy_translate(s.params, {4}, {"solo"});
  const std::vector<Method> methods = {Method::RandomPermute, Method::Uniform,
                                       Method::ZeroOutMax, Method::Aggregate};
  const PreservationReport report =
      run_analysis(s.params, {trace}, methods, s.tgt_vocab, synth_lexicon(), AnalysisConfig{});
  for (const TokenOutcome& token : report.outcomes) {
    for (const MethodOutcome& mo : token.results) {
      CHECK(mo.outcome == Outcome::NotCounterfactualizable);
    }
  }
  const MethodStats* agg = report.stats_for(Method::Aggregate);
  CHECK(agg->all_tokens.not_counterfactualizable == report.total_tokens);
  CHECK(agg->all_tokens.preserved == 0);
}

TEST_CASE("requesting only the aggregate still computes its components") {
  const auto s = tiny_setup(4, 6, 8, 67, 6);
  const std::vector<TranslationTrace> traces = decode_corpus(s, 3);
  const PreservationReport report = run_analysis(s.params, traces, {Method::Aggregate},
                                                 s.tgt_vocab, synth_lexicon(), AnalysisConfig{});
  CHECK(report.methods == std::vector<Method>{Method::Aggregate});
  for (const TokenOutcome& token : report.outcomes) CHECK(token.results.size() == 1);
}

TEST_CASE("analysis is invariant to the worker count") {
  const auto s = tiny_setup(10, 6, 8, 71, 6);
  const std::vector<TranslationTrace> traces = decode_corpus(s, 10);
  const std::vector<Method> all(kMethodOrder.begin(), kMethodOrder.end());

  AnalysisConfig serial;
  serial.jobs = 1;
  AnalysisConfig parallel;
  parallel.jobs = 4;
  const PreservationReport a =
      run_analysis(s.params, traces, all, s.tgt_vocab, synth_lexicon(), serial);
  const PreservationReport b =
      run_analysis(s.params, traces, all, s.tgt_vocab, synth_lexicon(), parallel);

  REQUIRE(a.outcomes.size() == b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    CHECK(a.outcomes[i].token == b.outcomes[i].token);
    for (std::size_t m = 0; m < a.outcomes[i].results.size(); ++m) {
      CHECK(a.outcomes[i].results[m].outcome == b.outcomes[i].results[m].outcome);
      CHECK(a.outcomes[i].results[m].alpha_argmax == b.outcomes[i].results[m].alpha_argmax);
    }
  }
  const std::string dump_a = outcome_dump_text(a);
  const std::string dump_b = outcome_dump_text(b);
  CHECK(dump_a == dump_b);
}

TEST_CASE("run_analysis contract errors") {
  const auto s = tiny_setup(4);
  CHECK_THROWS_AS(run_analysis(s.params, {}, {Method::Uniform}, s.tgt_vocab, synth_lexicon(),
                               AnalysisConfig{}),
                  ContractError);
  const std::vector<TranslationTrace> traces = decode_corpus(s, 1);
  CHECK_THROWS_AS(
      run_analysis(s.params, traces, {}, s.tgt_vocab, synth_lexicon(), AnalysisConfig{}),
      ContractError);
}

namespace {

// hand-built report for table semantics tests
PreservationReport fabricated_report() {
  PreservationReport report;
  report.methods = {Method::Uniform};
  report.stats.resize(1);
  report.config.min_frequency = 20;
  report.tool_version = "test";

  auto add_token = [&](const std::string& text, std::size_t total, std::size_t preserved,
                       WordClass cls) {
    for (std::size_t i = 0; i < total; ++i) {
      TokenOutcome t;
      t.token = text;
      t.word_class = cls;
      t.results.push_back(
          {i < preserved ? Outcome::Preserved : Outcome::NotPreserved, 1, true});
      report.outcomes.push_back(std::move(t));
    }
  };
  // mirrors the documented spot check: 310 preserved of 444 is 70%
  add_token("going", 444, 310, WordClass::Content);
  add_token("boundary", 20, 20, WordClass::Content);   // excluded: total not > 20
  add_token("kept", 21, 7, WordClass::Content);        // included: total > 20
  add_token("always", 30, 30, WordClass::Content);
  add_token("the", 50, 40, WordClass::Function);
  return report;
}

}  // namespace

TEST_CASE("top_tokens: sorting, the strict frequency threshold, and coverage") {
  const PreservationReport report = fabricated_report();

  const auto by_count =
      top_tokens(report, Method::Uniform, WordClass::Content, SortBy::Count, 20);
  REQUIRE(by_count.size() == 4);
  CHECK(by_count[0].token == "going");
  CHECK(by_count[0].preserved == 310);
  CHECK(by_count[0].total == 444);
  CHECK(rounded_percent(by_count[0].coverage) == 70);
  CHECK(by_count[1].token == "always");  // 30 preserved
  CHECK(by_count[2].token == "boundary");

  const auto by_coverage =
      top_tokens(report, Method::Uniform, WordClass::Content, SortBy::Coverage, 20);
  REQUIRE(by_coverage.size() == 3);  // "boundary" (total == 20) is excluded
  CHECK(by_coverage[0].token == "always");
  CHECK(by_coverage[0].coverage == 1.0);
  CHECK(by_coverage[1].token == "going");
  CHECK(by_coverage[2].token == "kept");
  for (const auto& row : by_coverage) CHECK(row.total > 20);

  // class filtering and the limit
  const auto functions =
      top_tokens(report, Method::Uniform, WordClass::Function, SortBy::Count, 20, 1);
  REQUIRE(functions.size() == 1);
  CHECK(functions[0].token == "the");

  CHECK_THROWS_AS(top_tokens(report, Method::ZeroOut, WordClass::Content, SortBy::Count, 20),
                  ContractError);
}

TEST_CASE("coverage of an always-preserved token is 100%") {
  const PreservationReport report = fabricated_report();
  const auto rows = top_tokens(report, Method::Uniform, WordClass::Content, SortBy::Count, 0);
  for (const auto& row : rows) {
    if (row.token == "always") CHECK(rounded_percent(row.coverage) == 100);
  }
}

TEST_CASE("report writers are deterministic and carry the metadata") {
  const auto s = tiny_setup(5, 6, 8, 73, 6);
  const std::vector<TranslationTrace> traces = decode_corpus(s, 5);
  const std::vector<Method> all(kMethodOrder.begin(), kMethodOrder.end());
  PreservationReport report =
      run_analysis(s.params, traces, all, s.tgt_vocab, synth_lexicon(), AnalysisConfig{});
  report.config_hash = "deadbeefdeadbeef";

  const std::string json_a = report_json_text(report);
  const std::string json_b = report_json_text(report);
  CHECK(json_a == json_b);
  CHECK(json_a.find("deadbeefdeadbeef") != std::string::npos);
  CHECK(json_a.find(report.checkpoint_hash) != std::string::npos);
  CHECK(json_a.find("\"schema\": \"attnscope-report\"") != std::string::npos);

  const std::string text = report_text(report);
  CHECK(text.find("randomPermute") != std::string::npos);
  CHECK(text.find("tokens (+EOS)") != std::string::npos);

  const std::string dump = outcome_dump_text(report);
  CHECK(dump.find("# sentence\tstep\ttoken\tclass") != std::string::npos);
  // one line per token plus the three header lines
  std::size_t lines = 0;
  for (char c : dump) lines += c == '\n';
  CHECK(lines == report.total_tokens + 3);
}

TEST_CASE("heatmap SVG and terminal rendering") {
  const std::vector<std::string> tokens = {"the", "green", "house", "▸"};
  const std::vector<double> uniform_row = {0.25, 0.25, 0.25, 0.25};
  const std::vector<double> one_hot = {0, 0, 1, 0};

  const std::string svg =
      attention_heatmap_svg(tokens, "haus", uniform_row, one_hot, "onlyMax");
  CHECK(svg.find("<?xml") == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
  CHECK(svg.find("haus") != std::string::npos);
  CHECK(svg.find("green") != std::string::npos);

  // uniform row: all four cells share one fill; one-hot: exactly one
  // saturated cell and three white ones
  std::map<std::string, int> fill_counts;
  std::size_t pos = 0;
  while ((pos = svg.find("fill=\"rgb", pos)) != std::string::npos) {
    const std::size_t end = svg.find('"', pos + 6);
    ++fill_counts[svg.substr(pos + 6, end - pos - 6)];
    pos = end;
  }
  CHECK(fill_counts["rgb(31,119,180)"] == 5);   // 4 uniform cells + the one-hot peak
  CHECK(fill_counts["rgb(255,255,255)"] == 3);  // zeros next to the one-hot peak

  const std::string bars =
      attention_bars_text(tokens, "haus", uniform_row, one_hot, "onlyMax");
  CHECK(bars.find("haus") != std::string::npos);
  CHECK(bars.find("house") != std::string::npos);
  CHECK(bars.find("0.250") != std::string::npos);

  CHECK_THROWS_AS(attention_heatmap_svg({}, "x", {}, {}, "m"), ContractError);
  CHECK_THROWS_AS(
      attention_heatmap_svg(tokens, "x", std::vector<double>{0.5, 0.5}, one_hot, "m"),
      ContractError);
}

TEST_CASE("xml special characters in tokens are escaped") {
  const std::vector<std::string> tokens = {"a<b", "c&d"};
  const std::vector<double> row = {0.5, 0.5};
  const std::string svg = attention_heatmap_svg(tokens, "\"q\"", row, row, "uniform");
  CHECK(svg.find("a&lt;b") != std::string::npos);
  CHECK(svg.find("c&amp;d") != std::string::npos);
  CHECK(svg.find("&quot;q&quot;") != std::string::npos);
  CHECK(svg.find("a<b") == std::string::npos);
}
