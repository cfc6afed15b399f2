#include "attnscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "attnscope/hash.hpp"
#include "attnscope/version.hpp"

namespace attnscope {

char outcome_letter(Outcome o) {
  switch (o) {
    case Outcome::Preserved: return 'P';
    case Outcome::NotPreserved: return 'N';
    case Outcome::NotCounterfactualizable: return 'X';
  }
  throw ContractError("outcome_letter: unknown outcome");
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Preserved: return "preserved";
    case Outcome::NotPreserved: return "not_preserved";
    case Outcome::NotCounterfactualizable: return "not_counterfactualizable";
  }
  throw ContractError("outcome_name: unknown outcome");
}

const MethodStats* PreservationReport::stats_for(Method m) const {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i] == m) return &stats[i];
  }
  return nullptr;
}

namespace {

// Replay without the integrity check; run_analysis verifies the hash once
// per trace instead of once per token.
bool replay_preserved(const ModelParams& params, const TranslationTrace& trace, std::size_t step,
                      std::span<const double> alpha_prime) {
  const std::size_t m = trace.encoder_states.size();
  if (step >= trace.steps.size()) {
    throw ContractError("check_preserved: step " + std::to_string(step) + " beyond trace length " +
                        std::to_string(trace.steps.size()));
  }
  if (alpha_prime.size() != m) {
    throw DimensionError("check_preserved: attention vector length " +
                         std::to_string(alpha_prime.size()) + " does not match source length " +
                         std::to_string(m));
  }

  NoGradGuard no_grad;
  std::vector<Tensor> rows;
  rows.reserve(m);
  for (const auto& h : trace.encoder_states) rows.push_back(Tensor::row(h));
  const Tensor enc_matrix = stack_rows(rows);
  const Tensor alpha = Tensor::row({alpha_prime.begin(), alpha_prime.end()});
  const Tensor context = matmul(alpha, enc_matrix);
  const Tensor state = Tensor::row(trace.steps[step].decoder_state);
  const Tensor logits = output_logits(params, state, context);
  return static_cast<int>(argmax_lowest(logits.values())) == trace.steps[step].emitted;
}

void verify_trace(const ModelParams& params, const TranslationTrace& trace,
                  std::uint64_t params_hash) {
  if (trace.checkpoint_hash != params_hash) {
    throw IntegrityError("trace was produced by checkpoint " + hex64(trace.checkpoint_hash) +
                         " but the loaded parameters hash to " + hex64(params_hash));
  }
  (void)params;
}

// Per-step attention scores recomputed from the stored decoder state, the
// same way the decoder scored them.
std::vector<double> recompute_scores(const ModelParams& params, const TranslationTrace& trace,
                                     std::size_t step) {
  NoGradGuard no_grad;
  std::vector<Tensor> rows;
  rows.reserve(trace.encoder_states.size());
  for (const auto& h : trace.encoder_states) rows.push_back(Tensor::row(h));
  const Tensor enc_matrix = stack_rows(rows);
  const Tensor state = Tensor::row(trace.steps[step].decoder_state);
  const Tensor scores = matmul(matmul(state, params.attn_w), transpose(enc_matrix));
  return {scores.values().begin(), scores.values().end()};
}

std::vector<Method> canonical_methods(std::vector<Method> methods) {
  std::vector<Method> out;
  for (Method m : kMethodOrder) {
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) out.push_back(m);
  }
  return out;
}

}  // namespace

MethodResult build_method_substitution(const ModelParams& params, const TranslationTrace& trace,
                                       std::size_t sentence_index, std::size_t step, Method method,
                                       const AnalysisConfig& config) {
  if (step >= trace.steps.size()) {
    throw ContractError("build_method_substitution: step " + std::to_string(step) +
                        " beyond trace length " + std::to_string(trace.steps.size()));
  }
  const auto& alpha = trace.steps[step].alpha;
  const std::size_t m = alpha.size();
  const std::size_t m_t = argmax_lowest(alpha);
  switch (method) {
    case Method::RandomPermute:
      return random_permute(
          alpha, intervention_seed(config.run_seed, sentence_index, step, method));
    case Method::Uniform:
      return uniform_attention(m, m_t);
    case Method::ZeroOutMax:
      return zero_out_max_from_scores(recompute_scores(params, trace, step));
    case Method::ZeroOut:
      return zero_out(m, m_t);
    case Method::LastEncoderState:
      return last_encoder_state(m, m_t);
    case Method::OnlyMax:
      return only_max(alpha);
    case Method::KeepMaxUniformOthers:
      return keep_max_uniform_others(alpha, config.keepmax_mode);
    case Method::Aggregate:
      throw ContractError("aggregate is derived, not built directly");
  }
  throw ContractError("build_method_substitution: unknown method");
}

bool check_preserved(const ModelParams& params, const TranslationTrace& trace, std::size_t step,
                     std::span<const double> alpha_prime) {
  verify_trace(params, trace, params.content_hash());
  return replay_preserved(params, trace, step, alpha_prime);
}

PreservationReport run_analysis(const ModelParams& params,
                                const std::vector<TranslationTrace>& traces,
                                std::vector<Method> methods, const Vocab& tgt_vocab,
                                const FunctionWordList& lexicon, const AnalysisConfig& config) {
  if (traces.empty()) throw ContractError("run_analysis: no traces");
  if (methods.empty()) throw ContractError("run_analysis: no methods");

  const std::vector<Method> requested = canonical_methods(std::move(methods));
  // aggregate is the union of the first three constrained methods; make
  // sure they are computed even when only the aggregate row was asked for
  std::vector<Method> computed = requested;
  if (std::find(computed.begin(), computed.end(), Method::Aggregate) != computed.end()) {
    for (Method m : {Method::RandomPermute, Method::Uniform, Method::ZeroOutMax}) {
      if (std::find(computed.begin(), computed.end(), m) == computed.end()) {
        computed.push_back(m);
      }
    }
    computed = canonical_methods(std::move(computed));
  }

  const std::uint64_t params_hash = params.content_hash();
  for (const TranslationTrace& t : traces) verify_trace(params, t, params_hash);

  auto index_of = [](const std::vector<Method>& v, Method m) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), m) - v.begin());
  };

  // Analyze one sentence; writes outcomes aligned with `computed`.
  auto analyze_sentence = [&](std::size_t sentence_index) {
    const TranslationTrace& trace = traces[sentence_index];
    std::vector<TokenOutcome> outcomes;
    outcomes.reserve(trace.steps.size());
    for (std::size_t step = 0; step < trace.steps.size(); ++step) {
      TokenOutcome token;
      token.sentence = sentence_index;
      token.step = step;
      token.token = tgt_vocab.token(trace.steps[step].emitted);
      token.word_class = lexicon.classify(token.token);
      token.original_argmax = argmax_lowest(trace.steps[step].alpha);
      token.results.resize(computed.size());

      for (std::size_t mi = 0; mi < computed.size(); ++mi) {
        const Method method = computed[mi];
        if (method == Method::Aggregate) continue;  // derived below
        const MethodResult sub =
            build_method_substitution(params, trace, sentence_index, step, method, config);
        MethodOutcome& out = token.results[mi];
        if (!sub.feasible) {
          out.outcome = Outcome::NotCounterfactualizable;
          out.alpha_argmax = token.original_argmax;
          out.counterfactual = false;
          continue;
        }
        out.alpha_argmax = sub.argmax;
        out.counterfactual = sub.counterfactual;
        if (method_requires_counterfactual(method) && !sub.counterfactual) {
          out.outcome = Outcome::NotCounterfactualizable;
          continue;
        }
        out.outcome = replay_preserved(params, trace, step, sub.weights)
                          ? Outcome::Preserved
                          : Outcome::NotPreserved;
      }

      if (std::find(computed.begin(), computed.end(), Method::Aggregate) != computed.end()) {
        MethodOutcome agg;
        agg.outcome = Outcome::NotCounterfactualizable;
        agg.alpha_argmax = token.original_argmax;
        agg.counterfactual = false;
        for (Method m : {Method::RandomPermute, Method::Uniform, Method::ZeroOutMax}) {
          const MethodOutcome& part = token.results[index_of(computed, m)];
          if (part.outcome == Outcome::Preserved) {
            agg.outcome = Outcome::Preserved;
            agg.alpha_argmax = part.alpha_argmax;
            agg.counterfactual = part.counterfactual;
            break;
          }
          if (part.outcome == Outcome::NotPreserved) {
            agg.outcome = Outcome::NotPreserved;
          }
        }
        token.results[index_of(computed, Method::Aggregate)] = agg;
      }
      outcomes.push_back(std::move(token));
    }
    return outcomes;
  };

  std::vector<std::vector<TokenOutcome>> per_sentence(traces.size());
  const std::size_t jobs = std::max<std::size_t>(1, config.jobs);
  if (jobs == 1 || traces.size() == 1) {
    for (std::size_t i = 0; i < traces.size(); ++i) per_sentence[i] = analyze_sentence(i);
  } else {
    std::vector<std::thread> workers;
    std::size_t per_worker = (traces.size() + jobs - 1) / jobs;
    for (std::size_t w = 0; w < jobs; ++w) {
      const std::size_t begin = w * per_worker;
      const std::size_t end = std::min(traces.size(), begin + per_worker);
      if (begin >= end) break;
      workers.emplace_back([&, begin, end] {
        for (std::size_t i = begin; i < end; ++i) per_sentence[i] = analyze_sentence(i);
      });
    }
    for (std::thread& w : workers) w.join();
  }

  PreservationReport report;
  report.methods = requested;
  report.config = config;
  report.checkpoint_hash = hex64(params_hash);
  report.tool_version = kToolVersion;
  report.stats.resize(requested.size());
  for (std::size_t i = 0; i < requested.size(); ++i) report.stats[i].method = requested[i];

  for (auto& sentence : per_sentence) {
    for (TokenOutcome& token : sentence) {
      // reduce the computed columns down to the requested ones
      std::vector<MethodOutcome> kept;
      kept.reserve(requested.size());
      for (Method m : requested) kept.push_back(token.results[index_of(computed, m)]);
      token.results = std::move(kept);

      ++report.total_tokens;
      const bool is_function = token.word_class == WordClass::Function;
      if (is_function) {
        ++report.function_tokens;
      } else {
        ++report.content_tokens;
      }
      for (std::size_t mi = 0; mi < requested.size(); ++mi) {
        ClassStats& cls = is_function ? report.stats[mi].function_words
                                      : report.stats[mi].content_words;
        for (ClassStats* s : {&cls, &report.stats[mi].all_tokens}) {
          switch (token.results[mi].outcome) {
            case Outcome::Preserved: ++s->preserved; break;
            case Outcome::NotPreserved: ++s->not_preserved; break;
            case Outcome::NotCounterfactualizable: ++s->not_counterfactualizable; break;
          }
        }
      }
      report.outcomes.push_back(std::move(token));
    }
  }
  return report;
}

std::vector<TopTokenRow> top_tokens(const PreservationReport& report, Method method,
                                    WordClass word_class, SortBy sort_by,
                                    std::size_t min_frequency, std::size_t limit) {
  std::size_t method_index = report.methods.size();
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    if (report.methods[i] == method) method_index = i;
  }
  if (method_index == report.methods.size()) {
    throw ContractError(std::string("top_tokens: method ") + method_name(method) +
                        " was not analyzed");
  }

  std::map<std::string, TopTokenRow> rows;
  for (const TokenOutcome& token : report.outcomes) {
    if (token.word_class != word_class) continue;
    TopTokenRow& row = rows[token.token];
    row.token = token.token;
    ++row.total;
    if (token.results[method_index].outcome == Outcome::Preserved) ++row.preserved;
  }

  std::vector<TopTokenRow> out;
  for (auto& [tok, row] : rows) {
    (void)tok;
    row.coverage = row.total == 0 ? 0.0
                                  : static_cast<double>(row.preserved) /
                                        static_cast<double>(row.total);
    if (sort_by == SortBy::Coverage && row.total <= min_frequency) continue;
    out.push_back(row);
  }

  if (sort_by == SortBy::Count) {
    std::sort(out.begin(), out.end(), [](const TopTokenRow& a, const TopTokenRow& b) {
      if (a.preserved != b.preserved) return a.preserved > b.preserved;
      return a.token < b.token;
    });
  } else {
    std::sort(out.begin(), out.end(), [](const TopTokenRow& a, const TopTokenRow& b) {
      if (a.coverage != b.coverage) return a.coverage > b.coverage;
      return a.token < b.token;
    });
  }
  if (limit > 0 && out.size() > limit) out.resize(limit);
  return out;
}

int rounded_percent(double fraction) {
  return static_cast<int>(std::lround(fraction * 100.0));
}

}  // namespace attnscope
