#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attnscope {

// Attention substitution methods, in canonical report order. The first three
// are constrained to move the argmax (counterfactual); Aggregate is their
// union; the last four probe sensitivity without that constraint.
enum class Method {
  RandomPermute,
  Uniform,
  ZeroOutMax,
  Aggregate,
  ZeroOut,
  LastEncoderState,
  OnlyMax,
  KeepMaxUniformOthers,
};

inline constexpr std::array<Method, 8> kMethodOrder = {
    Method::RandomPermute, Method::Uniform,          Method::ZeroOutMax,
    Method::Aggregate,     Method::ZeroOut,          Method::LastEncoderState,
    Method::OnlyMax,       Method::KeepMaxUniformOthers,
};

const char* method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);  // case-insensitive
// Stable numeric id; part of the per-token seed derivation, so it must
// never be renumbered.
int method_id(Method m);
// True for the methods whose results only count when the substituted
// vector's argmax differs from the original.
bool method_requires_counterfactual(Method m);

// How KeepMaxUniformOthers spreads the remaining mass: over all m positions
// (the default; the result does not sum to 1) or over the m-1 non-max
// positions (a proper distribution).
enum class KeepMaxMode { OverLength, OverRemainder };

const char* keepmax_mode_name(KeepMaxMode mode);
std::optional<KeepMaxMode> keepmax_mode_from_name(std::string_view name);

// A substituted attention vector. "counterfactual" is always computed from
// the produced weights (argmax moved?), never assumed from the method.
// feasible == false means the method cannot produce any output here (for
// example a permutation constraint that no permutation satisfies); weights
// are empty in that case.
struct MethodResult {
  std::vector<double> weights;
  std::size_t argmax = 0;
  bool counterfactual = false;
  bool feasible = true;
};

// Permutation of the weights whose argmax lands away from the original's;
// rejection-sampled from the seeded generator. Infeasible when m == 1 or
// all weights are equal (the tie rule pins the argmax to index 0 then).
MethodResult random_permute(std::span<const double> alpha, std::uint64_t seed);

// All weights 1/m.
MethodResult uniform_attention(std::size_t length, std::size_t original_argmax);

// Removes the top weight and renormalizes the rest proportionally.
// Infeasible when m == 1 or no mass remains.
MethodResult zero_out_max(std::span<const double> alpha);

// Score-level variant: sets the top score to -inf and re-runs softmax.
// Agrees with zero_out_max(alpha) up to rounding.
MethodResult zero_out_max_from_scores(std::span<const double> scores);

// All weights zero; the downstream context collapses to the zero vector.
// Deliberately not a distribution.
MethodResult zero_out(std::size_t length, std::size_t original_argmax);

// One-hot on the last source position.
MethodResult last_encoder_state(std::size_t length, std::size_t original_argmax);

// One-hot on the original argmax.
MethodResult only_max(std::span<const double> alpha);

// Keeps the top weight, spreads the remainder uniformly per the mode.
MethodResult keep_max_uniform_others(std::span<const double> alpha, KeepMaxMode mode);

// Seed for the one method that draws randomness, derived per
// (run, sentence, step, method) so results are order- and
// parallelism-independent.
std::uint64_t intervention_seed(std::uint64_t run_seed, std::size_t sentence_index,
                                std::size_t step, Method method);

}  // namespace attnscope
