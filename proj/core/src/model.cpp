#include "attnscope/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnscope/hash.hpp"

namespace attnscope {

namespace {

constexpr double kInitLow = -0.1;
constexpr double kInitHigh = 0.1;

LstmCell init_cell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  return LstmCell{
      Tensor::uniform({input_dim, 4 * hidden_dim}, kInitLow, kInitHigh, rng),
      Tensor::uniform({hidden_dim, 4 * hidden_dim}, kInitLow, kInitHigh, rng),
      Tensor::uniform({1, 4 * hidden_dim}, kInitLow, kInitHigh, rng),
  };
}

}  // namespace

void ModelConfig::validate() const {
  if (emb_dim == 0 || hidden_dim == 0 || layers == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (src_vocab < 4 || tgt_vocab < 4) {
    throw ConfigError("vocabulary sizes must cover the reserved tokens");
  }
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.emb_dim;
  const std::size_t h = config.hidden_dim;

  ModelParams p;
  p.config = config;
  p.src_embed = Tensor::uniform({config.src_vocab, d}, kInitLow, kInitHigh, rng);
  p.tgt_embed = Tensor::uniform({config.tgt_vocab, d}, kInitLow, kInitHigh, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    p.enc_fwd.push_back(init_cell(l == 0 ? d : h, h, rng));
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    p.enc_bwd.push_back(init_cell(l == 0 ? d : h, h, rng));
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    // layer 0 consumes [embedding; previous context]
    p.dec.push_back(init_cell(l == 0 ? d + 2 * h : h, h, rng));
  }
  p.attn_w = Tensor::uniform({h, 2 * h}, kInitLow, kInitHigh, rng);
  p.out_w = Tensor::uniform({3 * h, config.tgt_vocab}, kInitLow, kInitHigh, rng);
  p.out_b = Tensor::uniform({1, config.tgt_vocab}, kInitLow, kInitHigh, rng);
  return p;
}

std::vector<Tensor> ModelParams::parameters() const {
  std::vector<Tensor> out = {src_embed, tgt_embed};
  auto push_cells = [&out](const std::vector<LstmCell>& cells) {
    for (const LstmCell& c : cells) {
      out.push_back(c.w_ih);
      out.push_back(c.w_hh);
      out.push_back(c.b);
    }
  };
  push_cells(enc_fwd);
  push_cells(enc_bwd);
  push_cells(dec);
  out.push_back(attn_w);
  out.push_back(out_w);
  out.push_back(out_b);
  return out;
}

std::vector<std::string> ModelParams::parameter_names() const {
  std::vector<std::string> out = {"src_embed", "tgt_embed"};
  auto push_cells = [&out](const std::string& prefix, std::size_t n) {
    for (std::size_t l = 0; l < n; ++l) {
      const std::string base = prefix + "_l" + std::to_string(l);
      out.push_back(base + "_wih");
      out.push_back(base + "_whh");
      out.push_back(base + "_b");
    }
  };
  push_cells("enc_fwd", enc_fwd.size());
  push_cells("enc_bwd", enc_bwd.size());
  push_cells("dec", dec.size());
  out.push_back("attn_w");
  out.push_back("out_w");
  out.push_back("out_b");
  return out;
}

void ModelParams::check_finite() const {
  const auto names = parameter_names();
  const auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params[i].values()) {
      if (!std::isfinite(v)) {
        throw NumericError("parameter " + names[i] + " contains a non-finite entry");
      }
    }
  }
}

std::uint64_t ModelParams::content_hash() const {
  const std::uint64_t dims[] = {config.emb_dim, config.hidden_dim, config.layers,
                                config.src_vocab, config.tgt_vocab};
  std::uint64_t h = fnv1a64(dims, sizeof(dims));
  const auto names = parameter_names();
  const auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    h = fnv1a64(names[i].data(), names[i].size(), h);
    const auto v = params[i].values();
    h = fnv1a64(v.data(), v.size() * sizeof(double), h);
  }
  return h;
}

// --- forward pieces -----------------------------------------------------------

LstmState lstm_step(const LstmCell& cell, const Tensor& input, const LstmState& previous) {
  const std::size_t h_dim = cell.w_hh.rows();
  const Tensor pre = add(add(matmul(input, cell.w_ih), matmul(previous.h, cell.w_hh)), cell.b);
  const Tensor gate_in = sigmoid(slice_cols(pre, 0, h_dim));
  const Tensor gate_forget = sigmoid(slice_cols(pre, h_dim, h_dim));
  const Tensor gate_cell = tanh(slice_cols(pre, 2 * h_dim, h_dim));
  const Tensor gate_out = sigmoid(slice_cols(pre, 3 * h_dim, h_dim));
  LstmState next;
  next.c = add(mul(gate_forget, previous.c), mul(gate_in, gate_cell));
  next.h = mul(gate_out, tanh(next.c));
  return next;
}

namespace {

// Runs one direction of the encoder stack over inputs given in consumption
// order; returns the top-layer hidden state per consumed position.
std::vector<Tensor> run_stack(const std::vector<LstmCell>& cells,
                              const std::vector<Tensor>& inputs, std::size_t hidden_dim) {
  std::vector<LstmState> states(cells.size());
  for (LstmState& s : states) {
    s.h = Tensor::zeros({1, hidden_dim});
    s.c = Tensor::zeros({1, hidden_dim});
  }
  std::vector<Tensor> top;
  top.reserve(inputs.size());
  for (const Tensor& x : inputs) {
    Tensor layer_in = x;
    for (std::size_t l = 0; l < cells.size(); ++l) {
      states[l] = lstm_step(cells[l], layer_in, states[l]);
      layer_in = states[l].h;
    }
    top.push_back(layer_in);
  }
  return top;
}

}  // namespace

EncodedSource encode(const ModelParams& params, const std::vector<int>& source_ids) {
  if (source_ids.empty()) throw ContractError("encode: empty source");
  const std::size_t m = source_ids.size();
  for (int id : source_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= params.config.src_vocab) {
      throw ContractError("encode: token id " + std::to_string(id) +
                          " outside source vocabulary of " +
                          std::to_string(params.config.src_vocab));
    }
  }

  std::vector<Tensor> embedded;
  embedded.reserve(m);
  for (int id : source_ids) {
    embedded.push_back(select_row(params.src_embed, static_cast<std::size_t>(id)));
  }

  const std::vector<Tensor> fwd_top = run_stack(params.enc_fwd, embedded, params.config.hidden_dim);

  std::vector<Tensor> reversed(embedded.rbegin(), embedded.rend());
  const std::vector<Tensor> bwd_top_rev =
      run_stack(params.enc_bwd, reversed, params.config.hidden_dim);

  EncodedSource out;
  out.states.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.states.push_back(concat(fwd_top[i], bwd_top_rev[m - 1 - i]));
  }
  out.matrix = stack_rows(out.states);
  return out;
}

AttentionResult attend(const ModelParams& params, const Tensor& decoder_state,
                       const Tensor& encoder_matrix) {
  const Tensor projected = matmul(decoder_state, params.attn_w);      // [1 x 2H]
  const Tensor scores = matmul(projected, transpose(encoder_matrix));  // [1 x m]
  AttentionResult out;
  out.alpha = softmax(scores);
  out.context = matmul(out.alpha, encoder_matrix);  // [1 x 2H]
  return out;
}

DecoderState decoder_start(const ModelParams& params) {
  DecoderState state;
  state.layers.resize(params.dec.size());
  for (LstmState& s : state.layers) {
    s.h = Tensor::zeros({1, params.config.hidden_dim});
    s.c = Tensor::zeros({1, params.config.hidden_dim});
  }
  return state;
}

Tensor decode_step(const ModelParams& params, int prev_token_id, DecoderState& state,
                   const Tensor& prev_context) {
  if (prev_token_id < 0 || static_cast<std::size_t>(prev_token_id) >= params.config.tgt_vocab) {
    throw ContractError("decode_step: token id " + std::to_string(prev_token_id) +
                        " outside target vocabulary");
  }
  Tensor layer_in =
      concat(select_row(params.tgt_embed, static_cast<std::size_t>(prev_token_id)), prev_context);
  for (std::size_t l = 0; l < params.dec.size(); ++l) {
    state.layers[l] = lstm_step(params.dec[l], layer_in, state.layers[l]);
    layer_in = state.layers[l].h;
  }
  return layer_in;
}

Tensor output_logits(const ModelParams& params, const Tensor& decoder_state,
                     const Tensor& context) {
  return add(matmul(concat(decoder_state, context), params.out_w), params.out_b);
}

// --- greedy decoding -----------------------------------------------------------

TranslationTrace greedy_translate(const ModelParams& params, const std::vector<int>& source_ids,
                                  const std::vector<std::string>& source_tokens,
                                  std::size_t max_steps) {
  NoGradGuard no_grad;
  const std::size_t m = source_ids.size();
  if (max_steps == 0) max_steps = 2 * m + 5;

  TranslationTrace trace;
  trace.source_ids = source_ids;
  trace.source_tokens = source_tokens;
  trace.max_steps = max_steps;
  trace.checkpoint_hash = params.content_hash();

  const EncodedSource enc = encode(params, source_ids);
  for (const Tensor& h : enc.states) {
    trace.encoder_states.emplace_back(h.values().begin(), h.values().end());
  }

  DecoderState state = decoder_start(params);
  Tensor context = Tensor::zeros({1, 2 * params.config.hidden_dim});
  int prev_token = Vocab::kBosId;
  for (std::size_t t = 0; t < max_steps; ++t) {
    const Tensor s = decode_step(params, prev_token, state, context);
    const AttentionResult att = attend(params, s, enc.matrix);
    const Tensor logits = output_logits(params, s, att.context);
    const int emitted = static_cast<int>(argmax_lowest(logits.values()));

    TraceStep step;
    step.decoder_state.assign(s.values().begin(), s.values().end());
    step.alpha.assign(att.alpha.values().begin(), att.alpha.values().end());
    step.context.assign(att.context.values().begin(), att.context.values().end());
    step.logits.assign(logits.values().begin(), logits.values().end());
    step.emitted = emitted;
    trace.steps.push_back(std::move(step));

    if (emitted == Vocab::kEosId) {
      trace.ended_with_eos = true;
      break;
    }
    prev_token = emitted;
    context = att.context;
  }
  return trace;
}

// --- training -------------------------------------------------------------------

void TrainConfig::validate() const {
  if (steps == 0) throw ConfigError("steps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (learning_rate < 0) throw ConfigError("learning_rate must be nonnegative");
  if (clip_norm <= 0) throw ConfigError("clip_norm must be positive");
  if (eval_interval == 0) throw ConfigError("eval_interval must be positive");
  if (heldout_fraction < 0 || heldout_fraction >= 1) {
    throw ConfigError("heldout_fraction must be in [0, 1)");
  }
}

namespace {

// Teacher-forced loss for one pair: sum of cross entropies over all target
// positions including EOS. Returns the scalar loss tensor; token count via
// out param.
Tensor sentence_loss(const ModelParams& params, const std::vector<int>& src_ids,
                     const std::vector<int>& tgt_ids, std::size_t& tokens) {
  const EncodedSource enc = encode(params, src_ids);
  DecoderState state = decoder_start(params);
  Tensor context = Tensor::zeros({1, 2 * params.config.hidden_dim});

  std::vector<int> inputs = {Vocab::kBosId};
  inputs.insert(inputs.end(), tgt_ids.begin(), tgt_ids.end());
  std::vector<int> targets = tgt_ids;
  targets.push_back(Vocab::kEosId);

  Tensor loss;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Tensor s = decode_step(params, inputs[t], state, context);
    const AttentionResult att = attend(params, s, enc.matrix);
    const Tensor logits = output_logits(params, s, att.context);
    const Tensor step_loss =
        cross_entropy_with_logits(logits, static_cast<std::size_t>(targets[t]));
    loss = loss.defined() ? add(loss, step_loss) : step_loss;
    context = att.context;
  }
  tokens += targets.size();
  return loss;
}

struct EncodedPair {
  std::vector<int> src;
  std::vector<int> tgt;
};

std::vector<EncodedPair> encode_pairs(const std::vector<SentencePair>& pairs,
                                      const Vocab& src_vocab, const Vocab& tgt_vocab) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const SentencePair& p : pairs) {
    out.push_back({src_vocab.encode_all(p.source), tgt_vocab.encode_all(p.target)});
  }
  return out;
}

double eval_loss(const ModelParams& params, const std::vector<EncodedPair>& pairs) {
  NoGradGuard no_grad;
  double total = 0;
  std::size_t tokens = 0;
  for (const EncodedPair& p : pairs) {
    total += sentence_loss(params, p.src, p.tgt, tokens).item();
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

double eval_accuracy(const ModelParams& params, const std::vector<EncodedPair>& pairs) {
  NoGradGuard no_grad;
  std::size_t correct = 0, total = 0;
  for (const EncodedPair& p : pairs) {
    const EncodedSource enc = encode(params, p.src);
    DecoderState state = decoder_start(params);
    Tensor context = Tensor::zeros({1, 2 * params.config.hidden_dim});
    std::vector<int> inputs = {Vocab::kBosId};
    inputs.insert(inputs.end(), p.tgt.begin(), p.tgt.end());
    std::vector<int> targets = p.tgt;
    targets.push_back(Vocab::kEosId);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const Tensor s = decode_step(params, inputs[t], state, context);
      const AttentionResult att = attend(params, s, enc.matrix);
      const Tensor logits = output_logits(params, s, att.context);
      if (static_cast<int>(argmax_lowest(logits.values())) == targets[t]) ++correct;
      ++total;
      context = att.context;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const Tensor& p : params) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

void restore(const std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    std::copy(snap[i].begin(), snap[i].end(), p.mutable_values().begin());
  }
}

std::string index_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

TrainResult train(ModelParams& params, const std::vector<SentencePair>& pairs,
                  const Vocab& src_vocab, const Vocab& tgt_vocab, const TrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw ContractError("train: empty corpus");

  const std::vector<EncodedPair> encoded = encode_pairs(pairs, src_vocab, tgt_vocab);

  // deterministic held-out split
  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(mix_seed({config.seed, 0x73706c6974ULL}));
  split_rng.shuffle(order);
  std::size_t heldout_count = static_cast<std::size_t>(
      std::llround(config.heldout_fraction * static_cast<double>(encoded.size())));
  if (encoded.size() >= 5 && config.heldout_fraction > 0 && heldout_count == 0) heldout_count = 1;
  if (heldout_count >= encoded.size()) heldout_count = encoded.size() - 1;
  std::vector<EncodedPair> heldout, training;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < heldout_count ? heldout : training).push_back(encoded[order[i]]);
  }
  if (training.empty()) {
    training = encoded;
    heldout.clear();
  }
  // with no held-out pairs, early stopping tracks training loss
  const std::vector<EncodedPair>& eval_set = heldout.empty() ? training : heldout;

  const std::vector<Tensor> param_list = params.parameters();
  AdamState adam(param_list, AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
  Rng batch_rng(mix_seed({config.seed, 0x6261746368ULL}));

  TrainResult result;
  result.heldout_pairs = heldout.size();
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_snapshot = snapshot(param_list);
  std::size_t best_step = 0;
  std::size_t evals_since_best = 0;
  double last_grad_norm = 0;

  for (std::size_t step = 1; step <= config.steps; ++step) {
    std::vector<std::size_t> batch(config.batch_size);
    for (std::size_t& b : batch) b = batch_rng.uniform_index(training.size());

    double loss_value = 0;
    try {
      Tensor loss;
      std::size_t token_count = 0;
      for (std::size_t idx : batch) {
        const Tensor l = sentence_loss(params, training[idx].src, training[idx].tgt, token_count);
        loss = loss.defined() ? add(loss, l) : l;
      }
      loss = scale(loss, 1.0 / static_cast<double>(config.batch_size));

      loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        throw NumericError("loss=" + std::to_string(loss_value));
      }

      backward(loss);
      last_grad_norm = clip_grad_norm(param_list, config.clip_norm);
      adam.step(param_list);
      for (const Tensor& p : param_list) {
        Tensor q = p;
        q.zero_grad();
      }
      params.check_finite();
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + " (batch [" +
                         index_list(batch) + "], last gradient norm " +
                         std::to_string(last_grad_norm) + "): " + e.what());
    }
    result.steps_run = step;

    if (step % config.eval_interval == 0 || step == config.steps) {
      const double held_loss = eval_loss(params, eval_set);
      const double held_acc = eval_accuracy(params, eval_set);
      result.curve.push_back({step, loss_value, held_loss, held_acc});
      if (held_loss < best_loss) {
        best_loss = held_loss;
        best_snapshot = snapshot(param_list);
        best_step = step;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best > config.patience) {
          result.stopped_early = true;
          break;
        }
      }
    }
  }

  restore(param_list, best_snapshot);
  result.best_heldout_loss = best_loss;
  result.best_step = best_step;
  result.final_heldout_accuracy = eval_accuracy(params, eval_set);
  return result;
}

double token_accuracy(const ModelParams& params, const std::vector<SentencePair>& pairs,
                      const Vocab& src_vocab, const Vocab& tgt_vocab) {
  return eval_accuracy(params, encode_pairs(pairs, src_vocab, tgt_vocab));
}

double mean_token_loss(const ModelParams& params, const std::vector<SentencePair>& pairs,
                       const Vocab& src_vocab, const Vocab& tgt_vocab) {
  return eval_loss(params, encode_pairs(pairs, src_vocab, tgt_vocab));
}

}  // namespace attnscope
