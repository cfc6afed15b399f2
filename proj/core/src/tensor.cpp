#include "attnscope/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace attnscope {

namespace {

thread_local bool g_autograd_enabled = true;

using detail::TensorNode;

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor axes must be positive, got " + shape_string(shape));
  }
}

void ensure_finite(const Tensor& t, const char* op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string(op) + ": non-finite input entry");
    }
  }
}

std::vector<double>& grad_buf(TensorNode& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

void ensure_finite_result(const std::vector<double>& out, const char* op) {
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite result");
    }
  }
}

// Builds an op result. Parents and the backward closure are recorded only
// when autograd is on and some operand participates in training.
Tensor make_op(std::vector<std::size_t> shape, std::vector<double> data,
               std::vector<Tensor> parents, std::function<void(TensorNode&)> backward_fn) {
  auto node = std::make_shared<TensorNode>(std::move(shape), std::move(data));
  if (g_autograd_enabled) {
    bool any_grad = false;
    for (const Tensor& p : parents) any_grad = any_grad || p.requires_grad();
    if (any_grad) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// --- Tensor basics ---------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  check_shape(shape);
  std::size_t n = element_count(shape);
  return Tensor(std::make_shared<TensorNode>(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  check_shape(shape);
  std::size_t n = element_count(shape);
  return Tensor(std::make_shared<TensorNode>(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  check_shape(shape);
  if (element_count(shape) != values.size()) {
    throw DimensionError("from: shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  return Tensor(std::make_shared<TensorNode>(std::move(shape), std::move(values)));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();  // before the move; evaluation order bites otherwise
  return from({1, n}, std::move(values));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
  check_shape(shape);
  std::size_t n = element_count(shape);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = rng.uniform_real(lo, hi);
  Tensor t = from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

const std::vector<std::size_t>& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->size();
}

std::size_t Tensor::rows() const {
  if (shape().size() != 2) throw DimensionError("rows: tensor is not rank 2: " + shape_string(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (shape().size() != 2) throw DimensionError("cols: tensor is not rank 2: " + shape_string(shape()));
  return node_->shape[1];
}

std::span<const double> Tensor::values() const& {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_values() & {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item: tensor is not scalar: " + shape_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->requires_grad = v;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const& {
  if (!has_grad()) throw ContractError("grad: no gradient present");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

// --- autograd mode ---------------------------------------------------------

bool autograd_enabled() { return g_autograd_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGradGuard::~NoGradGuard() { g_autograd_enabled = previous_; }

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw DimensionError("matmul: operands must be rank 2: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  ensure_finite(a, "matmul");
  ensure_finite(b, "matmul");

  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * n;
      double* crow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  ensure_finite_result(out, "matmul");

  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    const double* dc = self.grad.data();
    if (na.requires_grad) {
      double* da = grad_buf(na).data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* dcrow = dc + i * n;
          const double* brow = nb.data.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) s += dcrow[j] * brow[j];
          da[i * k + kk] += s;
        }
      }
    }
    if (nb.requires_grad) {
      double* db = grad_buf(nb).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = na.data.data() + i * k;
        const double* dcrow = dc + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double aik = arow[kk];
          double* dbrow = db + kk * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += aik * dcrow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) {
    throw DimensionError("transpose: operand must be rank 2: " + shape_string(a.shape()));
  }
  ensure_finite(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const double* pa = a.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = pa[i * n + j];

  return make_op({n, m}, std::move(out), {a}, [m, n](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    if (!na.requires_grad) return;
    double* da = grad_buf(na).data();
    const double* dc = self.grad.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dc[j * m + i];
  });
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  ensure_finite(a, "add");
  ensure_finite(b, "add");
  std::vector<double> out(a.size());
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  ensure_finite_result(out, "add");

  return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    for (int which = 0; which < 2; ++which) {
      TensorNode& p = *self.parents[which];
      if (!p.requires_grad) continue;
      double* dp = grad_buf(p).data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) dp[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  ensure_finite(a, "mul");
  ensure_finite(b, "mul");
  std::vector<double> out(a.size());
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  ensure_finite_result(out, "mul");

  return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    if (na.requires_grad) {
      double* da = grad_buf(na).data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * nb.data[i];
    }
    if (nb.requires_grad) {
      double* db = grad_buf(nb).data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i] * na.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  ensure_finite(a, "scale");
  if (!std::isfinite(factor)) throw ContractError("scale: non-finite factor");
  std::vector<double> out(a.size());
  const double* pa = a.values().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * factor;
  ensure_finite_result(out, "scale");

  return make_op(a.shape(), std::move(out), {a}, [factor](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    if (!na.requires_grad) return;
    double* da = grad_buf(na).data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += factor * self.grad[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  ensure_finite(a, "sigmoid");
  std::vector<double> out(a.size());
  const double* pa = a.values().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-pa[i]));

  return make_op(a.shape(), std::move(out), {a}, [](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    if (!na.requires_grad) return;
    double* da = grad_buf(na).data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      da[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  ensure_finite(a, "tanh");
  std::vector<double> out(a.size());
  const double* pa = a.values().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(pa[i]);

  return make_op(a.shape(), std::move(out), {a}, [](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    if (!na.requires_grad) return;
    double* da = grad_buf(na).data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      da[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  ensure_finite(a, "concat");
  ensure_finite(b, "concat");
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != sb.size()) {
    throw DimensionError("concat: rank mismatch: " + shape_string(sa) + " vs " + shape_string(sb));
  }
  if (sa.size() > 2) throw DimensionError("concat: rank > 2 unsupported");
  const std::size_t rows = sa.size() == 2 ? sa[0] : 1;
  if (sa.size() == 2 && sa[0] != sb[0]) {
    throw DimensionError("concat: row counts disagree: " + shape_string(sa) + " vs " +
                         shape_string(sb));
  }
  const std::size_t ca = sa.back(), cb = sb.back();
  std::vector<double> out(rows * (ca + cb));
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(pa + r * ca, pa + (r + 1) * ca, out.data() + r * (ca + cb));
    std::copy(pb + r * cb, pb + (r + 1) * cb, out.data() + r * (ca + cb) + ca);
  }
  std::vector<std::size_t> shape = sa;
  shape.back() = ca + cb;

  return make_op(std::move(shape), std::move(out), {a, b}, [rows, ca, cb](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    const double* dc = self.grad.data();
    if (na.requires_grad) {
      double* da = grad_buf(na).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < ca; ++j) da[r * ca + j] += dc[r * (ca + cb) + j];
    }
    if (nb.requires_grad) {
      double* db = grad_buf(nb).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cb; ++j) db[r * cb + j] += dc[r * (ca + cb) + ca + j];
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t n = rows.front().cols();
  for (const Tensor& r : rows) {
    ensure_finite(r, "stack_rows");
    if (r.shape().size() != 2 || r.rows() != 1 || r.cols() != n) {
      throw DimensionError("stack_rows: expected [1x" + std::to_string(n) + "] rows, got " +
                           shape_string(r.shape()));
    }
  }
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (const Tensor& r : rows) {
    auto v = r.values();
    out.insert(out.end(), v.begin(), v.end());
  }

  return make_op({rows.size(), n}, std::move(out), rows, [n](TensorNode& self) {
    for (std::size_t r = 0; r < self.parents.size(); ++r) {
      TensorNode& p = *self.parents[r];
      if (!p.requires_grad) continue;
      double* dp = grad_buf(p).data();
      const double* dc = self.grad.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) dp[j] += dc[j];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t first, std::size_t count) {
  if (a.shape().size() != 2) {
    throw DimensionError("slice_cols: operand must be rank 2: " + shape_string(a.shape()));
  }
  ensure_finite(a, "slice_cols");
  const std::size_t m = a.rows(), n = a.cols();
  if (first + count > n || count == 0) {
    throw DimensionError("slice_cols: range [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of " + shape_string(a.shape()));
  }
  std::vector<double> out(m * count);
  const double* pa = a.values().data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy(pa + i * n + first, pa + i * n + first + count, out.data() + i * count);

  return make_op({m, count}, std::move(out), {a}, [m, n, first, count](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    if (!na.requires_grad) return;
    double* da = grad_buf(na).data();
    const double* dc = self.grad.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) da[i * n + first + j] += dc[i * count + j];
  });
}

Tensor select_row(const Tensor& matrix, std::size_t row) {
  if (matrix.shape().size() != 2) {
    throw DimensionError("select_row: operand must be rank 2: " + shape_string(matrix.shape()));
  }
  ensure_finite(matrix, "select_row");
  const std::size_t m = matrix.rows(), n = matrix.cols();
  if (row >= m) {
    throw ContractError("select_row: row " + std::to_string(row) + " out of " +
                        shape_string(matrix.shape()));
  }
  auto v = matrix.values();
  std::vector<double> out(v.begin() + row * n, v.begin() + (row + 1) * n);

  return make_op({1, n}, std::move(out), {matrix}, [row, n](TensorNode& self) {
    TensorNode& nm = *self.parents[0];
    if (!nm.requires_grad) return;
    double* dm = grad_buf(nm).data();
    for (std::size_t j = 0; j < n; ++j) dm[row * n + j] += self.grad[j];
  });
}

Tensor softmax(const Tensor& scores) {
  const auto v = scores.values();
  if (v.empty()) throw ContractError("softmax: empty input");
  double max_finite = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw ContractError("softmax: entries must be finite or the -inf mask sentinel");
    }
    if (std::isfinite(x)) max_finite = std::max(max_finite, x);
  }
  if (!std::isfinite(max_finite)) {
    throw NumericError("softmax: all entries masked, distribution is degenerate");
  }
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::isfinite(v[i]) ? std::exp(v[i] - max_finite) : 0.0;
    total += out[i];
  }
  for (double& y : out) y /= total;

  return make_op(scores.shape(), std::move(out), {scores}, [](TensorNode& self) {
    TensorNode& ns = *self.parents[0];
    if (!ns.requires_grad) return;
    double* ds = grad_buf(ns).data();
    double dot = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.data[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ds[i] += self.data[i] * (self.grad[i] - dot);
    }
  });
}

Tensor sum(const Tensor& a) {
  ensure_finite(a, "sum");
  double s = 0.0;
  for (double x : a.values()) s += x;
  ensure_finite_result({s}, "sum");

  return make_op({1}, {s}, {a}, [](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    if (!na.requires_grad) return;
    double* da = grad_buf(na).data();
    for (std::size_t i = 0; i < na.data.size(); ++i) da[i] += self.grad[0];
  });
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t target) {
  ensure_finite(logits, "cross_entropy_with_logits");
  const auto v = logits.values();
  if (target >= v.size()) {
    throw ContractError("cross_entropy_with_logits: target " + std::to_string(target) +
                        " out of vocabulary " + std::to_string(v.size()));
  }
  double max_v = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - max_v);
  const double log_sum_exp = max_v + std::log(total);
  const double loss = log_sum_exp - v[target];

  return make_op({1}, {loss}, {logits}, [target, max_v, total](TensorNode& self) {
    TensorNode& nl = *self.parents[0];
    if (!nl.requires_grad) return;
    double* dl = grad_buf(nl).data();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < nl.data.size(); ++i) {
      const double p = std::exp(nl.data[i] - max_v) / total;
      dl[i] += g * (p - (i == target ? 1.0 : 0.0));
    }
  });
}

// --- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined tensor");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss does not carry a recorded computation");
  }

  // Iterative post-order DFS; recursion depth over an unrolled sequence
  // graph can get large.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Intermediate gradients are per-sweep scratch: only leaves (tensors
  // without a recorded producer) accumulate across repeated calls.
  for (TensorNode* n : order) {
    if (n->backward_fn) n->grad.clear();
  }
  grad_buf(*loss.node())[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax_lowest: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// --- Adam ---------------------------------------------------------------------

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig config) : config_(config) {
  if (config_.learning_rate < 0 || config_.beta1 <= 0 || config_.beta1 >= 1 ||
      config_.beta2 <= 0 || config_.beta2 >= 1 || config_.epsilon <= 0) {
    throw ConfigError("adam: hyperparameters out of range");
  }
  moment1_.reserve(params.size());
  moment2_.reserve(params.size());
  for (const Tensor& p : params) {
    moment1_.emplace_back(p.size(), 0.0);
    moment2_.emplace_back(p.size(), 0.0);
  }
}

void AdamState::step(const std::vector<Tensor>& params) {
  if (params.size() != moment1_.size()) {
    throw ContractError("adam_step: parameter list changed size");
  }
  step_count_ += 1;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    if (!p.has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    auto g = p.grad();
    if (g.size() != moment1_[i].size()) {
      throw ContractError("adam_step: gradient shape mismatch on parameter " + std::to_string(i));
    }
    auto data = p.mutable_values();
    auto& m = moment1_[i];
    auto& v = moment2_[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      data[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw NumericError("gradient norm is not finite: " + std::to_string(norm));
  }
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (const Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.node()->grad) g *= factor;
    }
  }
  return norm;
}

}  // namespace attnscope
