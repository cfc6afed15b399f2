#include "attnscope/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnscope/errors.hpp"
#include "attnscope/rng.hpp"
#include "attnscope/tensor.hpp"

namespace attnscope {

const char* method_name(Method m) {
  switch (m) {
    case Method::RandomPermute: return "randomPermute";
    case Method::Uniform: return "uniform";
    case Method::ZeroOutMax: return "zeroOutMax";
    case Method::Aggregate: return "aggregate";
    case Method::ZeroOut: return "zeroOut";
    case Method::LastEncoderState: return "lastEncoderState";
    case Method::OnlyMax: return "onlyMax";
    case Method::KeepMaxUniformOthers: return "keepMaxUniformOthers";
  }
  throw ContractError("method_name: unknown method");
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
  }
  return out;
}

}  // namespace

std::optional<Method> method_from_name(std::string_view name) {
  const std::string n = lower(name);
  for (Method m : kMethodOrder) {
    if (n == lower(method_name(m))) return m;
  }
  return std::nullopt;
}

int method_id(Method m) {
  switch (m) {
    case Method::RandomPermute: return 1;
    case Method::Uniform: return 2;
    case Method::ZeroOutMax: return 3;
    case Method::Aggregate: return 4;
    case Method::ZeroOut: return 5;
    case Method::LastEncoderState: return 6;
    case Method::OnlyMax: return 7;
    case Method::KeepMaxUniformOthers: return 8;
  }
  throw ContractError("method_id: unknown method");
}

bool method_requires_counterfactual(Method m) {
  return m == Method::RandomPermute || m == Method::Uniform || m == Method::ZeroOutMax ||
         m == Method::Aggregate;
}

const char* keepmax_mode_name(KeepMaxMode mode) {
  return mode == KeepMaxMode::OverLength ? "overLength" : "overRemainder";
}

std::optional<KeepMaxMode> keepmax_mode_from_name(std::string_view name) {
  const std::string n = lower(name);
  if (n == "overlength") return KeepMaxMode::OverLength;
  if (n == "overremainder") return KeepMaxMode::OverRemainder;
  return std::nullopt;
}

namespace {

MethodResult finish(std::vector<double> weights, std::size_t original_argmax) {
  MethodResult r;
  r.weights = std::move(weights);
  r.argmax = argmax_lowest(r.weights);
  r.counterfactual = r.argmax != original_argmax;
  return r;
}

MethodResult infeasible() {
  MethodResult r;
  r.feasible = false;
  r.counterfactual = false;
  return r;
}

}  // namespace

MethodResult random_permute(std::span<const double> alpha, std::uint64_t seed) {
  if (alpha.empty()) throw ContractError("random_permute: empty attention vector");
  const std::size_t original = argmax_lowest(alpha);
  if (alpha.size() == 1) return infeasible();
  const bool all_equal = std::all_of(alpha.begin(), alpha.end(),
                                     [&](double w) { return w == alpha[0]; });
  if (all_equal) return infeasible();

  Rng rng(seed);
  std::vector<double> perm(alpha.begin(), alpha.end());
  for (int attempt = 0; attempt < 100000; ++attempt) {
    rng.shuffle(perm);
    if (argmax_lowest(perm) != original) return finish(std::move(perm), original);
  }
  // a valid permutation exists whenever not all weights are equal
  throw NumericError("random_permute: rejection sampling failed to terminate");
}

MethodResult uniform_attention(std::size_t length, std::size_t original_argmax) {
  if (length == 0) throw ContractError("uniform_attention: empty attention vector");
  return finish(std::vector<double>(length, 1.0 / static_cast<double>(length)), original_argmax);
}

MethodResult zero_out_max(std::span<const double> alpha) {
  if (alpha.empty()) throw ContractError("zero_out_max: empty attention vector");
  const std::size_t original = argmax_lowest(alpha);
  if (alpha.size() == 1) return infeasible();
  double remaining = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i != original) remaining += alpha[i];
  }
  if (remaining <= 0.0) return infeasible();
  std::vector<double> weights(alpha.size(), 0.0);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i != original) weights[i] = alpha[i] / remaining;
  }
  return finish(std::move(weights), original);
}

MethodResult zero_out_max_from_scores(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("zero_out_max_from_scores: empty score vector");
  const std::size_t original = argmax_lowest(scores);
  if (scores.size() == 1) return infeasible();
  std::vector<double> masked(scores.begin(), scores.end());
  masked[original] = -std::numeric_limits<double>::infinity();
  const Tensor sm = softmax(Tensor::row(std::move(masked)));
  return finish(std::vector<double>(sm.values().begin(), sm.values().end()), original);
}

MethodResult zero_out(std::size_t length, std::size_t original_argmax) {
  if (length == 0) throw ContractError("zero_out: empty attention vector");
  return finish(std::vector<double>(length, 0.0), original_argmax);
}

MethodResult last_encoder_state(std::size_t length, std::size_t original_argmax) {
  if (length == 0) throw ContractError("last_encoder_state: empty attention vector");
  std::vector<double> weights(length, 0.0);
  weights.back() = 1.0;
  return finish(std::move(weights), original_argmax);
}

MethodResult only_max(std::span<const double> alpha) {
  if (alpha.empty()) throw ContractError("only_max: empty attention vector");
  const std::size_t original = argmax_lowest(alpha);
  std::vector<double> weights(alpha.size(), 0.0);
  weights[original] = 1.0;
  return finish(std::move(weights), original);
}

MethodResult keep_max_uniform_others(std::span<const double> alpha, KeepMaxMode mode) {
  if (alpha.empty()) throw ContractError("keep_max_uniform_others: empty attention vector");
  const std::size_t original = argmax_lowest(alpha);
  const double top = alpha[original];
  if (alpha.size() == 1) {
    // nothing to spread; the vector is unchanged in both modes
    return finish({top}, original);
  }
  const double denom = mode == KeepMaxMode::OverLength ? static_cast<double>(alpha.size())
                                                       : static_cast<double>(alpha.size() - 1);
  const double rest = std::max((1.0 - top) / denom, 0.0);
  std::vector<double> weights(alpha.size(), rest);
  weights[original] = top;
  return finish(std::move(weights), original);
}

std::uint64_t intervention_seed(std::uint64_t run_seed, std::size_t sentence_index,
                                std::size_t step, Method method) {
  return mix_seed({run_seed, static_cast<std::uint64_t>(sentence_index),
                   static_cast<std::uint64_t>(step),
                   static_cast<std::uint64_t>(method_id(method))});
}

}  // namespace attnscope
