#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnscope/corpus.hpp"
#include "attnscope/rng.hpp"
#include "attnscope/tensor.hpp"

namespace attnscope {

struct ModelConfig {
  std::size_t emb_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;

  void validate() const;
};

// One LSTM cell: gate pre-activations are x*w_ih + h*w_hh + b with gate
// order [input, forget, cell, output].
struct LstmCell {
  Tensor w_ih;  // [in x 4H]
  Tensor w_hh;  // [H x 4H]
  Tensor b;     // [1 x 4H]
};

struct LstmState {
  Tensor h;  // [1 x H]
  Tensor c;  // [1 x H]
};

// Bilinear-attention encoder-decoder. The encoder runs a forward and a
// backward LSTM stack and concatenates their top layers per position; the
// decoder scores each source state s * W * h_i, mixes encoder states with
// the softmaxed weights, and projects [state; context] to vocab logits.
struct ModelParams {
  ModelConfig config;
  Tensor src_embed;  // [Vs x D]
  Tensor tgt_embed;  // [Vt x D]
  std::vector<LstmCell> enc_fwd;  // per layer
  std::vector<LstmCell> enc_bwd;
  std::vector<LstmCell> dec;
  Tensor attn_w;  // [H x 2H]
  Tensor out_w;   // [(H + 2H) x Vt]
  Tensor out_b;   // [1 x Vt]

  // All weights drawn uniformly from [-0.1, 0.1), in a fixed order, so a
  // seed fully determines the starting point.
  static ModelParams init(const ModelConfig& config, Rng& rng);

  std::vector<Tensor> parameters() const;
  std::vector<std::string> parameter_names() const;
  void check_finite() const;
  // Fingerprint of dimensions plus raw weight bytes; traces and reports
  // carry it so stale artifacts are detected.
  std::uint64_t content_hash() const;
};

LstmState lstm_step(const LstmCell& cell, const Tensor& input, const LstmState& previous);

struct EncodedSource {
  std::vector<Tensor> states;  // m tensors, each [1 x 2H]
  Tensor matrix;               // [m x 2H]
};

EncodedSource encode(const ModelParams& params, const std::vector<int>& source_ids);

struct AttentionResult {
  Tensor alpha;    // [1 x m]
  Tensor context;  // [1 x 2H]
};

AttentionResult attend(const ModelParams& params, const Tensor& decoder_state,
                       const Tensor& encoder_matrix);

struct DecoderState {
  std::vector<LstmState> layers;
};

DecoderState decoder_start(const ModelParams& params);

// One recurrent update: consumes the embedding of the previous output token
// concatenated with the previous context, and returns the new top-layer
// hidden state. The context from step t-1 enters here; the context from
// step t enters output_logits.
Tensor decode_step(const ModelParams& params, int prev_token_id, DecoderState& state,
                   const Tensor& prev_context);

Tensor output_logits(const ModelParams& params, const Tensor& decoder_state,
                     const Tensor& context);

// --- greedy decoding with trace capture -------------------------------------

struct TraceStep {
  std::vector<double> decoder_state;  // [H]
  std::vector<double> alpha;          // [m]
  std::vector<double> context;        // [2H]
  std::vector<double> logits;         // [Vt]
  int emitted = 0;
};

// Everything needed to replay any step of a decode without re-running the
// encoder: source ids/tokens, encoder states, and per-step state, attention,
// context, logits, and the emitted token.
struct TranslationTrace {
  std::vector<int> source_ids;
  std::vector<std::string> source_tokens;
  std::vector<std::vector<double>> encoder_states;  // m rows of [2H]
  std::vector<TraceStep> steps;
  bool ended_with_eos = false;
  std::size_t max_steps = 0;
  std::uint64_t checkpoint_hash = 0;
};

// Greedy argmax decoding (lowest index wins ties) until EOS or max_steps.
// max_steps == 0 selects the default 2*m + 5.
TranslationTrace greedy_translate(const ModelParams& params, const std::vector<int>& source_ids,
                                  const std::vector<std::string>& source_tokens,
                                  std::size_t max_steps = 0);

// --- training ----------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t steps = 3000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  std::size_t eval_interval = 100;
  std::size_t patience = 10;  // evals without improvement before stopping
  double heldout_fraction = 0.1;

  void validate() const;
};

struct CurvePoint {
  std::size_t step = 0;
  double train_loss = 0;
  double heldout_loss = 0;
  double heldout_accuracy = 0;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  std::size_t steps_run = 0;
  bool stopped_early = false;
  double best_heldout_loss = 0;
  std::size_t best_step = 0;
  double final_heldout_accuracy = 0;
  std::size_t heldout_pairs = 0;
};

// Teacher-forced cross-entropy training with Adam, gradient clipping, and
// early stopping on held-out loss. The params end at the best-scoring
// evaluation point. Throws NumericError with diagnostics if the loss stops
// being finite.
TrainResult train(ModelParams& params, const std::vector<SentencePair>& pairs,
                  const Vocab& src_vocab, const Vocab& tgt_vocab, const TrainConfig& config);

// Teacher-forced argmax accuracy over all target positions, EOS included.
double token_accuracy(const ModelParams& params, const std::vector<SentencePair>& pairs,
                      const Vocab& src_vocab, const Vocab& tgt_vocab);

// Mean teacher-forced cross entropy per token.
double mean_token_loss(const ModelParams& params, const std::vector<SentencePair>& pairs,
                       const Vocab& src_vocab, const Vocab& tgt_vocab);

}  // namespace attnscope
