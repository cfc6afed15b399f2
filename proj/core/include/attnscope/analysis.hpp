#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attnscope/intervention.hpp"
#include "attnscope/lexicon.hpp"
#include "attnscope/model.hpp"

namespace attnscope {

enum class Outcome { Preserved, NotPreserved, NotCounterfactualizable };

char outcome_letter(Outcome o);        // 'P', 'N', 'X'
const char* outcome_name(Outcome o);   // "preserved", ...

struct MethodOutcome {
  Outcome outcome = Outcome::NotPreserved;
  // argmax of the substituted attention vector (meaningful when one was
  // produced; for the aggregate row, argmax of the first preserving
  // component, if any)
  std::size_t alpha_argmax = 0;
  bool counterfactual = false;
};

struct TokenOutcome {
  std::size_t sentence = 0;
  std::size_t step = 0;
  std::string token;
  WordClass word_class = WordClass::Content;
  std::size_t original_argmax = 0;
  std::vector<MethodOutcome> results;  // aligned with PreservationReport::methods
};

struct ClassStats {
  std::size_t preserved = 0;
  std::size_t not_preserved = 0;
  std::size_t not_counterfactualizable = 0;

  std::size_t total() const { return preserved + not_preserved + not_counterfactualizable; }
  double rate() const {
    return total() == 0 ? 0.0 : static_cast<double>(preserved) / static_cast<double>(total());
  }
};

struct MethodStats {
  Method method = Method::Uniform;
  ClassStats function_words;
  ClassStats content_words;
  ClassStats all_tokens;
};

struct AnalysisConfig {
  std::uint64_t run_seed = 1;
  KeepMaxMode keepmax_mode = KeepMaxMode::OverLength;
  std::size_t jobs = 1;
  std::size_t min_frequency = 20;  // by-coverage tables keep tokens with total > this
};

struct PreservationReport {
  std::vector<Method> methods;     // canonical order, as requested
  std::vector<MethodStats> stats;  // aligned with methods
  std::vector<TokenOutcome> outcomes;
  std::size_t total_tokens = 0;
  std::size_t function_tokens = 0;
  std::size_t content_tokens = 0;
  AnalysisConfig config;
  std::string checkpoint_hash;  // hex
  std::string config_hash;      // hex of the run config; empty for library-only runs
  std::string tool_version;

  const MethodStats* stats_for(Method m) const;
};

// Replays step `step` of the trace with the attention row replaced:
// context' = alpha' * stored encoder states, logits' = output projection of
// (stored decoder state, context'). True when the argmax equals the token
// the trace emitted. The trace is never modified; later steps keep their
// original records (the substituted context feeds only this step's logits,
// not the next state update). Throws IntegrityError when the trace was not
// produced by these params.
bool check_preserved(const ModelParams& params, const TranslationTrace& trace, std::size_t step,
                     std::span<const double> alpha_prime);

// Builds the substituted attention row one concrete method would use at
// this step (Aggregate is derived from the others and is rejected here).
// ZeroOutMax works at score level: the scores are recomputed from the
// stored decoder state and masked before the softmax.
MethodResult build_method_substitution(const ModelParams& params, const TranslationTrace& trace,
                                       std::size_t sentence_index, std::size_t step, Method method,
                                       const AnalysisConfig& config);

// Full protocol over a trace corpus: for every step of every trace and
// every requested method, substitute attention, replay, classify the token,
// and tally. Tokens where a constrained method cannot move the argmax are
// counted as NotCounterfactualizable: present in totals, never preserved.
// The aggregate row is the per-token union of RandomPermute, Uniform, and
// ZeroOutMax.
PreservationReport run_analysis(const ModelParams& params,
                                const std::vector<TranslationTrace>& traces,
                                std::vector<Method> methods, const Vocab& tgt_vocab,
                                const FunctionWordList& lexicon,
                                const AnalysisConfig& config = {});

enum class SortBy { Count, Coverage };

struct TopTokenRow {
  std::string token;
  std::size_t preserved = 0;
  std::size_t total = 0;
  double coverage = 0.0;
};

// Per-token preservation table for one method and word class. The
// by-coverage view keeps only tokens whose total occurrences exceed
// min_frequency. Sorted descending, ties broken by token text; limit == 0
// returns all rows.
std::vector<TopTokenRow> top_tokens(const PreservationReport& report, Method method,
                                    WordClass word_class, SortBy sort_by,
                                    std::size_t min_frequency, std::size_t limit = 0);

int rounded_percent(double fraction);

}  // namespace attnscope
