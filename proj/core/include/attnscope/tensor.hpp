#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "attnscope/errors.hpp"
#include "attnscope/rng.hpp"

namespace attnscope {

namespace detail {

// One node of the recorded computation. Ops that run while autograd is
// enabled link their result to the operand nodes and attach a closure that
// pushes the result's gradient back into them.
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "no gradient yet"
  bool requires_grad = false;

  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  TensorNode(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  std::size_t size() const { return data.size(); }
};

}  // namespace detail

// Dense row-major tensor of 64-bit floats with an optional gradient slot.
// Value-semantic handle: copies share the underlying storage, which is what
// lets the optimizer update parameters held by the model in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor row(std::vector<double> values);  // shape [1 x n]
  static Tensor scalar(double value);             // shape [1]
  // Entries drawn uniformly from [lo, hi); requires_grad is set, making this
  // the parameter-initialization entry point.
  static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t size() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;

  // The spans alias the tensor's storage; calling these on a temporary
  // would dangle, so rvalues are rejected outright.
  std::span<const double> values() const&;
  std::span<const double> values() const&& = delete;
  std::span<double> mutable_values() &;
  double item() const;  // scalar tensors only
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);
  bool has_grad() const;
  std::span<const double> grad() const&;  // throws ContractError when absent
  std::span<const double> grad() const&& = delete;
  void zero_grad();

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// --- autograd mode -------------------------------------------------------

bool autograd_enabled();

// Disables recording for the current thread while alive. Inference and
// replay paths run under this guard; they produce plain values.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// --- operations ----------------------------------------------------------
//
// Every op validates that its inputs are finite and registers a gradient
// rule. softmax is the one exception to the finiteness rule: it accepts
// -inf entries as an explicit "masked out" sentinel.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor concat(const Tensor& a, const Tensor& b);  // along the last axis
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor slice_cols(const Tensor& a, std::size_t first, std::size_t count);
Tensor select_row(const Tensor& matrix, std::size_t row);
Tensor softmax(const Tensor& scores);
Tensor sum(const Tensor& a);
Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t target);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into the
// grad slot of every reachable tensor with requires_grad set; calling again
// without zero_grad accumulates further.
void backward(const Tensor& loss);

// Lowest index attaining the maximum. The tie rule used everywhere.
std::size_t argmax_lowest(std::span<const double> values);

// --- Adam ----------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moment accumulators plus the shared step
// counter. step() applies one bias-corrected update; gradients are left
// untouched so the caller decides when to reset them.
class AdamState {
 public:
  explicit AdamState(const std::vector<Tensor>& params, AdamConfig config = {});

  void step(const std::vector<Tensor>& params);

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment(std::size_t i) const { return moment1_.at(i); }
  std::span<const double> second_moment(std::size_t i) const { return moment2_.at(i); }

 private:
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> moment1_;
  std::vector<std::vector<double>> moment2_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping. Throws NumericError if the norm is not
// finite.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace attnscope
