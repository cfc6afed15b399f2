#pragma once

// Shared test oracles. Everything here recomputes model quantities with
// plain double loops, independent of the tensor library, so the tests
// check the implementation against a second route rather than against
// itself.

#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "attnscope/model.hpp"
#include "attnscope/tensor.hpp"

namespace attnscope::testing {

// --- central finite differences ------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_location;
  std::size_t entries_checked = 0;
};

// Compares backprop gradients of loss_fn against central differences.
// loss_fn must rebuild the computation from the current parameter values.
inline GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn,
                                       const std::vector<Tensor>& params,
                                       const std::vector<std::string>& names,
                                       double h = 1e-4) {
  for (const Tensor& p : params) {
    Tensor q = p;
    q.zero_grad();
  }
  Tensor loss = loss_fn();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    auto data = p.mutable_values();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + h;
      const double up = loss_fn().item();
      data[j] = saved - h;
      const double down = loss_fn().item();
      data[j] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic[pi][j];
      const double rel = std::abs(ad - fd) / std::max(1e-4, std::abs(ad) + std::abs(fd));
      ++result.entries_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_location = names[pi] + "[" + std::to_string(j) + "] ad=" +
                                std::to_string(ad) + " fd=" + std::to_string(fd);
      }
    }
  }
  return result;
}

// --- reference recurrent model --------------------------------------------

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // [rows][cols]

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  }
  return m;
}

inline Vec to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

struct RefCell {
  Mat w_ih;
  Mat w_hh;
  Vec b;
};

inline RefCell ref_cell(const LstmCell& cell) {
  return {to_mat(cell.w_ih), to_mat(cell.w_hh), to_vec(cell.b)};
}

inline void ref_lstm_step(const RefCell& cell, const Vec& x, Vec& h, Vec& c) {
  const std::size_t hd = h.size();
  Vec z(4 * hd, 0.0);
  for (std::size_t j = 0; j < 4 * hd; ++j) {
    double s = cell.b[j];
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * cell.w_ih[i][j];
    for (std::size_t i = 0; i < hd; ++i) s += h[i] * cell.w_hh[i][j];
    z[j] = s;
  }
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  Vec nc(hd), nh(hd);
  for (std::size_t i = 0; i < hd; ++i) {
    const double gi = sig(z[i]);
    const double gf = sig(z[hd + i]);
    const double gc = std::tanh(z[2 * hd + i]);
    const double go = sig(z[3 * hd + i]);
    nc[i] = gf * c[i] + gi * gc;
    nh[i] = go * std::tanh(nc[i]);
  }
  c = nc;
  h = nh;
}

inline Vec ref_softmax(Vec scores) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double total = 0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

// Full reference forward. Runs the same greedy decode as the library and
// can substitute the attention row at exactly one step, touching only that
// step's output distribution; the recurrence always consumes the
// unsubstituted context.
struct RefModel {
  Mat src_embed, tgt_embed, attn_w, out_w;
  Vec out_b;
  std::vector<RefCell> enc_fwd, enc_bwd, dec;
  std::size_t hidden;

  explicit RefModel(const ModelParams& p)
      : src_embed(to_mat(p.src_embed)),
        tgt_embed(to_mat(p.tgt_embed)),
        attn_w(to_mat(p.attn_w)),
        out_w(to_mat(p.out_w)),
        out_b(to_vec(p.out_b)),
        hidden(p.config.hidden_dim) {
    for (const auto& c : p.enc_fwd) enc_fwd.push_back(ref_cell(c));
    for (const auto& c : p.enc_bwd) enc_bwd.push_back(ref_cell(c));
    for (const auto& c : p.dec) dec.push_back(ref_cell(c));
  }

  std::vector<Vec> run_direction(const std::vector<RefCell>& cells,
                                 const std::vector<Vec>& inputs) const {
    std::vector<Vec> h(cells.size(), Vec(hidden, 0.0));
    std::vector<Vec> c(cells.size(), Vec(hidden, 0.0));
    std::vector<Vec> top;
    for (const Vec& x : inputs) {
      Vec layer_in = x;
      for (std::size_t l = 0; l < cells.size(); ++l) {
        ref_lstm_step(cells[l], layer_in, h[l], c[l]);
        layer_in = h[l];
      }
      top.push_back(layer_in);
    }
    return top;
  }

  std::vector<Vec> encode(const std::vector<int>& ids) const {
    std::vector<Vec> emb;
    for (int id : ids) emb.push_back(src_embed[static_cast<std::size_t>(id)]);
    const std::vector<Vec> fwd = run_direction(enc_fwd, emb);
    std::vector<Vec> rev(emb.rbegin(), emb.rend());
    const std::vector<Vec> bwd = run_direction(enc_bwd, rev);
    std::vector<Vec> states;
    for (std::size_t i = 0; i < emb.size(); ++i) {
      Vec h = fwd[i];
      const Vec& back = bwd[emb.size() - 1 - i];
      h.insert(h.end(), back.begin(), back.end());
      states.push_back(std::move(h));
    }
    return states;
  }

  Vec attention_scores(const Vec& s, const std::vector<Vec>& enc) const {
    const std::size_t twoh = 2 * hidden;
    Vec u(twoh, 0.0);
    for (std::size_t k = 0; k < twoh; ++k) {
      double acc = 0;
      for (std::size_t i = 0; i < s.size(); ++i) acc += s[i] * attn_w[i][k];
      u[k] = acc;
    }
    Vec scores(enc.size(), 0.0);
    for (std::size_t i = 0; i < enc.size(); ++i) {
      double acc = 0;
      for (std::size_t k = 0; k < twoh; ++k) acc += u[k] * enc[i][k];
      scores[i] = acc;
    }
    return scores;
  }

  Vec logits_of(const Vec& s, const Vec& context) const {
    Vec cat = s;
    cat.insert(cat.end(), context.begin(), context.end());
    Vec logits = out_b;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      double acc = logits[j];
      for (std::size_t i = 0; i < cat.size(); ++i) acc += cat[i] * out_w[i][j];
      logits[j] = acc;
    }
    return logits;
  }

  struct Step {
    Vec alpha;
    Vec logits;             // logits actually used for the emitted token
    Vec substituted_logits;  // filled at the override step
    int emitted;
  };

  // override_step == SIZE_MAX disables substitution.
  std::vector<Step> greedy(const std::vector<int>& src_ids, std::size_t max_steps,
                           std::size_t override_step = static_cast<std::size_t>(-1),
                           const Vec* override_alpha = nullptr) const {
    const std::vector<Vec> enc = encode(src_ids);
    if (max_steps == 0) max_steps = 2 * src_ids.size() + 5;
    std::vector<Vec> h(dec.size(), Vec(hidden, 0.0));
    std::vector<Vec> c(dec.size(), Vec(hidden, 0.0));
    Vec context(2 * hidden, 0.0);
    int prev = Vocab::kBosId;
    std::vector<Step> steps;
    for (std::size_t t = 0; t < max_steps; ++t) {
      Vec x = tgt_embed[static_cast<std::size_t>(prev)];
      x.insert(x.end(), context.begin(), context.end());
      Vec layer_in = x;
      for (std::size_t l = 0; l < dec.size(); ++l) {
        ref_lstm_step(dec[l], layer_in, h[l], c[l]);
        layer_in = h[l];
      }
      const Vec& s = layer_in;
      const Vec alpha = ref_softmax(attention_scores(s, enc));
      Vec ctx(2 * hidden, 0.0);
      for (std::size_t i = 0; i < enc.size(); ++i) {
        for (std::size_t k = 0; k < 2 * hidden; ++k) ctx[k] += alpha[i] * enc[i][k];
      }

      Step step;
      step.alpha = alpha;
      step.logits = logits_of(s, ctx);
      if (t == override_step && override_alpha != nullptr) {
        Vec sub_ctx(2 * hidden, 0.0);
        for (std::size_t i = 0; i < enc.size(); ++i) {
          for (std::size_t k = 0; k < 2 * hidden; ++k) {
            sub_ctx[k] += (*override_alpha)[i] * enc[i][k];
          }
        }
        step.substituted_logits = logits_of(s, sub_ctx);
      }
      // emission always follows the unsubstituted distribution: the
      // substitution is examined in isolation and must not leak forward
      std::size_t best = 0;
      for (std::size_t i = 1; i < step.logits.size(); ++i) {
        if (step.logits[i] > step.logits[best]) best = i;
      }
      step.emitted = static_cast<int>(best);
      steps.push_back(step);
      if (step.emitted == Vocab::kEosId) break;
      prev = step.emitted;
      context = ctx;
    }
    return steps;
  }
};

// Small deterministic corpus + model for unit tests.
struct TinySetup {
  std::vector<SentencePair> pairs;
  Vocab src_vocab;
  Vocab tgt_vocab;
  ModelParams params;
};

inline TinySetup tiny_setup(std::size_t n_pairs = 6, std::size_t emb = 6, std::size_t hidden = 8,
                            std::uint64_t seed = 11, std::size_t content_vocab = 6) {
  TinySetup s;
  s.pairs = synth_corpus(SynthSpec{n_pairs, content_vocab, seed}).pairs;
  s.src_vocab = Vocab::build(s.pairs, Vocab::Side::Source, 1000);
  s.tgt_vocab = Vocab::build(s.pairs, Vocab::Side::Target, 1000);
  ModelConfig mc;
  mc.emb_dim = emb;
  mc.hidden_dim = hidden;
  mc.layers = 2;
  mc.src_vocab = s.src_vocab.size();
  mc.tgt_vocab = s.tgt_vocab.size();
  Rng rng(mix_seed({seed, 0x7061726dULL}));
  s.params = ModelParams::init(mc, rng);
  return s;
}

}  // namespace attnscope::testing
