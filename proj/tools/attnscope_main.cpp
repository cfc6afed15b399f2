// attnscope command line: train a small attention NMT model, translate,
// and probe whether its attention weights explain its token choices.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnscope/analysis.hpp"
#include "attnscope/checkpoint.hpp"
#include "attnscope/corpus.hpp"
#include "attnscope/hash.hpp"
#include "attnscope/heatmap.hpp"
#include "attnscope/lexicon.hpp"
#include "attnscope/model.hpp"
#include "attnscope/report.hpp"
#include "attnscope/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace attnscope {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;

// exit codes: 0 ok, 2 usage/config, 3 numeric failure, 4 format/version
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitFormat = 4;

struct RunConfig {
  std::uint64_t seed = 1;

  bool use_synth = true;
  std::size_t synth_pairs = 500;
  std::size_t synth_vocab = 40;
  std::uint64_t synth_seed = 0;  // 0 means: follow seed
  std::string source_path;
  std::string target_path;
  std::size_t max_len = 50;
  std::size_t vocab_cap = 50000;

  std::size_t emb_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;

  double learning_rate = 0.001;
  std::size_t steps = 3000;
  std::size_t batch_size = 8;
  double clip_norm = 5.0;
  std::size_t eval_interval = 100;
  std::size_t patience = 10;
  double heldout_fraction = 0.1;

  std::string function_words = "data/function_words.txt";
  std::string methods = "all";
  std::size_t min_frequency = 20;
  std::string keepmax_mode = "overLength";

  std::uint64_t effective_synth_seed() const { return synth_seed ? synth_seed : seed; }
};

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["tool_version"] = kToolVersion;
  j["seed"] = c.seed;
  j["corpus"] = ordered_json{{"synth", c.use_synth},
                             {"synth_pairs", c.synth_pairs},
                             {"synth_vocab", c.synth_vocab},
                             {"synth_seed", c.effective_synth_seed()},
                             {"source", c.source_path},
                             {"target", c.target_path},
                             {"max_len", c.max_len},
                             {"vocab_cap", c.vocab_cap}};
  j["model"] = ordered_json{
      {"emb_dim", c.emb_dim}, {"hidden_dim", c.hidden_dim}, {"layers", c.layers}};
  j["training"] = ordered_json{{"learning_rate", c.learning_rate},
                               {"steps", c.steps},
                               {"batch_size", c.batch_size},
                               {"clip_norm", c.clip_norm},
                               {"eval_interval", c.eval_interval},
                               {"patience", c.patience},
                               {"heldout_fraction", c.heldout_fraction}};
  j["analysis"] = ordered_json{{"function_words", c.function_words},
                               {"methods", c.methods},
                               {"min_frequency", c.min_frequency},
                               {"keepmax_mode", c.keepmax_mode}};
  return j;
}

std::string config_hash_of(const std::string& config_text) {
  return hex64(fnv1a64(config_text.data(), config_text.size()));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got \"" + value + "\"");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got \"" + value + "\"");
  }
}

// Optional key=value config file; command-line flags win. Unknown keys are
// an error so typos do not silently change a run.
using Setter = std::function<void(const std::string&)>;

void apply_config_file(const std::string& path, const std::map<std::string, Setter>& setters,
                       const std::set<std::string>& given_on_cli) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    const auto first = trimmed.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    trimmed = trimmed.substr(first);
    if (trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(trimmed.substr(0, eq));
    const std::string value = strip(trimmed.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown config key \"" + key +
                        "\"");
    }
    if (given_on_cli.count(key)) continue;  // flags win
    it->second(value);
  }
}

void parse_synth_spec(const std::vector<std::string>& entries, RunConfig& config) {
  config.use_synth = true;
  for (const std::string& entry : entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--synth entries must be key=value, got \"" + entry + "\"");
    }
    const std::string key = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);
    if (key == "pairs") {
      config.synth_pairs = parse_u64(key, value);
    } else if (key == "vocab" || key == "content-vocab") {
      config.synth_vocab = parse_u64(key, value);
    } else if (key == "seed") {
      config.synth_seed = parse_u64(key, value);
    } else {
      throw ConfigError("--synth: unknown key \"" + key + "\" (expected pairs, vocab, seed)");
    }
  }
}

std::vector<Method> parse_methods(const std::string& spec) {
  std::vector<Method> out;
  if (spec == "all") {
    out.assign(kMethodOrder.begin(), kMethodOrder.end());
    return out;
  }
  std::stringstream ss(spec);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const auto m = method_from_name(name);
    if (!m) throw ConfigError("unknown method \"" + name + "\"");
    if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
  }
  if (out.empty()) throw ConfigError("no methods selected");
  return out;
}

KeepMaxMode parse_keepmax(const std::string& name) {
  const auto mode = keepmax_mode_from_name(name);
  if (!mode) {
    throw ConfigError("unknown keepmax mode \"" + name +
                      "\" (expected overLength or overRemainder)");
  }
  return *mode;
}

struct LoadedCorpus {
  std::vector<SentencePair> pairs;
  Vocab src_vocab;
  Vocab tgt_vocab;
};

LoadedCorpus prepare_corpus(const RunConfig& config) {
  LoadedCorpus out;
  if (config.use_synth) {
    SynthSpec spec{config.synth_pairs, config.synth_vocab, config.effective_synth_seed()};
    out.pairs = synth_corpus(spec).pairs;
  } else {
    if (config.source_path.empty() || config.target_path.empty()) {
      throw ConfigError("train needs --src and --tgt, or a --synth spec");
    }
    ParallelCorpus corpus =
        load_parallel(config.source_path, config.target_path, config.max_len);
    if (corpus.dropped_too_long || corpus.dropped_empty) {
      std::cerr << "dropped " << corpus.dropped_too_long << " over-length and "
                << corpus.dropped_empty << " empty pairs\n";
    }
    if (corpus.pairs.empty()) {
      std::cerr << "warning: corpus is empty after filtering\n";
    }
    out.pairs = std::move(corpus.pairs);
  }
  if (out.pairs.empty()) throw ConfigError("no usable sentence pairs");
  out.src_vocab = Vocab::build(out.pairs, Vocab::Side::Source, config.vocab_cap);
  out.tgt_vocab = Vocab::build(out.pairs, Vocab::Side::Target, config.vocab_cap);
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path);
}

std::vector<std::string> read_nonempty_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// --- train -------------------------------------------------------------------

int cmd_train(const RunConfig& config, const std::string& out_path,
              const std::string& curve_path) {
  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.steps = config.steps;
  tc.batch_size = config.batch_size;
  tc.seed = config.seed;
  tc.clip_norm = config.clip_norm;
  tc.eval_interval = config.eval_interval;
  tc.patience = config.patience;
  tc.heldout_fraction = config.heldout_fraction;
  tc.validate();

  const LoadedCorpus corpus = prepare_corpus(config);

  ModelConfig mc;
  mc.emb_dim = config.emb_dim;
  mc.hidden_dim = config.hidden_dim;
  mc.layers = config.layers;
  mc.src_vocab = corpus.src_vocab.size();
  mc.tgt_vocab = corpus.tgt_vocab.size();

  Rng init_rng(mix_seed({config.seed, kInitTag}));
  ModelParams params = ModelParams::init(mc, init_rng);

  std::cerr << "training on " << corpus.pairs.size() << " pairs (src vocab "
            << corpus.src_vocab.size() << ", tgt vocab " << corpus.tgt_vocab.size() << ")\n";
  const TrainResult result = train(params, corpus.pairs, corpus.src_vocab, corpus.tgt_vocab, tc);

  const std::string config_text = config_json(config).dump();
  save_checkpoint(out_path, params, corpus.src_vocab, corpus.tgt_vocab, config_text);

  std::string curve;
  curve += "# attnscope loss curve v1\n";
  curve += "# tool_version=" + std::string(kToolVersion) +
           " config_hash=" + config_hash_of(config_text) + "\n";
  curve += "# step\ttrain_loss\theldout_loss\theldout_accuracy\n";
  char buf[160];
  for (const CurvePoint& p : result.curve) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\n", p.step, p.train_loss,
                  p.heldout_loss, p.heldout_accuracy);
    curve += buf;
  }
  write_text_file(curve_path, curve);

  std::cerr << "ran " << result.steps_run << " steps"
            << (result.stopped_early ? " (stopped early)" : "") << ", best held-out loss "
            << result.best_heldout_loss << " at step " << result.best_step
            << ", held-out token accuracy " << result.final_heldout_accuracy << "\n";
  std::cout << out_path << "\n";
  return kExitOk;
}

// --- translate -----------------------------------------------------------------

int cmd_translate(const std::string& ckpt_path, const std::string& src_path,
                  const std::string& out_path, std::size_t max_steps) {
  const CheckpointData ckpt = load_checkpoint(ckpt_path);
  std::vector<std::string> lines;
  if (src_path.empty() || src_path == "-") {
    std::string line;
    while (std::getline(std::cin, line)) lines.push_back(line);
  } else {
    lines = read_nonempty_lines(src_path);
  }

  std::ostringstream out;
  for (const std::string& line : lines) {
    const std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) {
      out << "\n";
      continue;
    }
    const TranslationTrace trace =
        greedy_translate(ckpt.params, ckpt.src_vocab.encode_all(tokens), tokens, max_steps);
    std::vector<std::string> words;
    for (const TraceStep& step : trace.steps) {
      if (step.emitted == Vocab::kEosId) break;
      words.push_back(ckpt.tgt_vocab.token(step.emitted));
    }
    out << join_tokens(words) << "\n";
  }

  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    write_text_file(out_path, out.str());
  }
  return kExitOk;
}

// --- analyze --------------------------------------------------------------------

// Decode every source sentence and keep the full traces, optionally across
// worker threads; slot-per-sentence keeps the result order deterministic.
std::vector<TranslationTrace> decode_all(const ModelParams& params, const Vocab& src_vocab,
                                         const std::vector<std::vector<std::string>>& sentences,
                                         std::size_t jobs) {
  std::vector<TranslationTrace> traces(sentences.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      traces[i] = greedy_translate(params, src_vocab.encode_all(sentences[i]), sentences[i]);
    }
  };
  if (jobs <= 1 || sentences.size() <= 1) {
    work(0, sentences.size());
  } else {
    std::vector<std::thread> workers;
    const std::size_t per = (sentences.size() + jobs - 1) / jobs;
    for (std::size_t w = 0; w < jobs; ++w) {
      const std::size_t begin = w * per;
      const std::size_t end = std::min(sentences.size(), begin + per);
      if (begin >= end) break;
      workers.emplace_back(work, begin, end);
    }
    for (std::thread& t : workers) t.join();
  }
  return traces;
}

int cmd_analyze(const std::string& ckpt_path, const std::string& src_path,
                const std::string& methods_spec, const std::string& out_dir,
                const std::string& fwords_flag, std::uint64_t seed_flag, bool seed_given,
                const std::string& keepmax_flag, bool keepmax_given, std::size_t min_freq,
                bool min_freq_given, std::size_t jobs, const std::string& config_path,
                bool force) {
  const CheckpointData ckpt = load_checkpoint(ckpt_path);
  ordered_json stored = ordered_json::parse(ckpt.config_text, nullptr, false);
  if (stored.is_discarded()) {
    throw FormatError(ckpt_path + ": checkpoint config snapshot is not valid JSON");
  }

  // A config file on analyze may not silently contradict what the
  // checkpoint was built with.
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + config_path);
    std::string line;
    const std::map<std::string, std::string> guarded = {
        {"emb", "/model/emb_dim"},       {"hidden", "/model/hidden_dim"},
        {"layers", "/model/layers"},     {"max-len", "/corpus/max_len"},
        {"vocab-cap", "/corpus/vocab_cap"}};
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = strip(line.substr(0, eq));
      const std::string value = strip(line.substr(eq + 1));
      const auto it = guarded.find(key);
      if (it == guarded.end()) continue;
      const ordered_json::json_pointer ptr(it->second);
      if (!stored.contains(ptr)) continue;
      const std::string stored_value = stored[ptr].dump();
      if (stored_value != value && !force) {
        throw IntegrityError("config file sets " + key + "=" + value +
                             " but the checkpoint was built with " + key + "=" + stored_value +
                             "; pass --force to analyze anyway");
      }
    }
  }

  std::vector<std::vector<std::string>> sentences;
  std::size_t dropped = 0;
  const std::size_t max_len = stored.value(ordered_json::json_pointer("/corpus/max_len"), 50u);
  for (const std::string& line : read_nonempty_lines(src_path)) {
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() > max_len) {
      ++dropped;
      continue;
    }
    sentences.push_back(std::move(tokens));
  }
  if (dropped) std::cerr << "dropped " << dropped << " over-length sentences\n";
  if (sentences.empty()) throw ConfigError(src_path + " contains no usable sentences");

  std::string fwords_path = fwords_flag;
  if (fwords_path.empty()) {
    fwords_path = stored.value(ordered_json::json_pointer("/analysis/function_words"),
                               std::string("data/function_words.txt"));
  }
  const FunctionWordList lexicon = FunctionWordList::load(fwords_path);

  AnalysisConfig ac;
  ac.run_seed = seed_given ? seed_flag
                           : stored.value(ordered_json::json_pointer("/seed"),
                                          static_cast<std::uint64_t>(1));
  ac.keepmax_mode = parse_keepmax(
      keepmax_given ? keepmax_flag
                    : stored.value(ordered_json::json_pointer("/analysis/keepmax_mode"),
                                   std::string("overLength")));
  ac.min_frequency = min_freq_given
                         ? min_freq
                         : stored.value(ordered_json::json_pointer("/analysis/min_frequency"),
                                        static_cast<std::size_t>(20));
  ac.jobs = jobs;

  const std::vector<TranslationTrace> traces =
      decode_all(ckpt.params, ckpt.src_vocab, sentences, jobs);

  PreservationReport report = run_analysis(ckpt.params, traces, parse_methods(methods_spec),
                                           ckpt.tgt_vocab, lexicon, ac);
  report.config_hash = config_hash_of(ckpt.config_text);

  fs::create_directories(out_dir);
  write_report_json(report, (fs::path(out_dir) / "report.json").string());
  write_report_text(report, (fs::path(out_dir) / "report.txt").string());
  write_outcome_dump(report, (fs::path(out_dir) / "outcomes.tsv").string());

  std::cout << report_text(report);
  return kExitOk;
}

// --- heatmap ---------------------------------------------------------------------

int cmd_heatmap(const std::string& ckpt_path, const std::string& text, const std::string& src_path,
                std::size_t index, std::size_t step, const std::string& method_name_arg,
                const std::string& out_path, std::uint64_t seed_flag, bool seed_given,
                const std::string& keepmax_flag) {
  const CheckpointData ckpt = load_checkpoint(ckpt_path);
  ordered_json stored = ordered_json::parse(ckpt.config_text, nullptr, false);

  std::vector<std::string> tokens;
  std::size_t sentence_index = 0;
  if (!text.empty()) {
    tokens = tokenize(text);
  } else if (!src_path.empty()) {
    const auto lines = read_nonempty_lines(src_path);
    std::vector<std::vector<std::string>> sentences;
    for (const std::string& line : lines) {
      auto toks = tokenize(line);
      if (!toks.empty()) sentences.push_back(std::move(toks));
    }
    if (index >= sentences.size()) {
      throw ConfigError("--index " + std::to_string(index) + " out of range; file has " +
                        std::to_string(sentences.size()) + " sentences");
    }
    tokens = sentences[index];
    sentence_index = index;
  } else {
    throw ConfigError("heatmap needs --text or --src");
  }
  if (tokens.empty()) throw ConfigError("the chosen sentence is empty after tokenization");

  const auto method = method_from_name(method_name_arg);
  if (!method) throw ConfigError("unknown method \"" + method_name_arg + "\"");
  if (*method == Method::Aggregate) {
    throw ConfigError("aggregate is a union of methods; pick one of its components");
  }

  const TranslationTrace trace =
      greedy_translate(ckpt.params, ckpt.src_vocab.encode_all(tokens), tokens);
  if (step >= trace.steps.size()) {
    throw ConfigError("--step " + std::to_string(step) + " beyond the decoded length of " +
                      std::to_string(trace.steps.size()));
  }

  AnalysisConfig ac;
  ac.run_seed = seed_given ? seed_flag
                           : (stored.is_discarded()
                                  ? 1
                                  : stored.value(ordered_json::json_pointer("/seed"),
                                                 static_cast<std::uint64_t>(1)));
  ac.keepmax_mode = parse_keepmax(keepmax_flag);

  const MethodResult sub =
      build_method_substitution(ckpt.params, trace, sentence_index, step, *method, ac);
  if (!sub.feasible) {
    throw ConfigError(std::string(method_name(*method)) +
                      " cannot produce a counterfactual vector at this step");
  }

  const std::string emitted = ckpt.tgt_vocab.token(trace.steps[step].emitted);
  const std::string provenance = std::string("attnscope ") + kToolVersion +
                                 " config_hash=" + config_hash_of(ckpt.config_text) +
                                 " checkpoint_hash=" + hex64(ckpt.params.content_hash());
  write_attention_heatmap_svg(out_path, tokens, emitted, trace.steps[step].alpha, sub.weights,
                              method_name(*method), provenance);

  std::cout << attention_bars_text(tokens, emitted, trace.steps[step].alpha, sub.weights,
                                   method_name(*method));
  const bool preserved = check_preserved(ckpt.params, trace, step, sub.weights);
  std::cout << "substituted argmax " << sub.argmax << " vs original "
            << argmax_lowest(trace.steps[step].alpha) << "; prediction "
            << (preserved ? "preserved" : "changed") << "\n";
  std::cout << out_path << "\n";
  return kExitOk;
}

// --- synth -----------------------------------------------------------------------

int cmd_synth(std::size_t pairs, std::size_t content_vocab, std::uint64_t seed,
              const std::string& out_prefix) {
  const SynthCorpus corpus = synth_corpus(SynthSpec{pairs, content_vocab, seed});

  std::string src, tgt, classes;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    src += join_tokens(corpus.pairs[i].source) + "\n";
    tgt += join_tokens(corpus.pairs[i].target) + "\n";
    std::string row;
    for (std::size_t j = 0; j < corpus.target_classes[i].size(); ++j) {
      if (j) row += ' ';
      row += corpus.target_classes[i][j];
    }
    classes += row + "\n";
  }
  std::string fwords = "# function-like tokens of the synthetic grammar\n";
  for (const std::string& t : synth_function_tokens()) fwords += t + "\n";

  write_text_file(out_prefix + ".src", src);
  write_text_file(out_prefix + ".tgt", tgt);
  write_text_file(out_prefix + ".classes", classes);
  write_text_file(out_prefix + ".fwords", fwords);

  std::cerr << "wrote " << corpus.pairs.size() << " pairs to " << out_prefix
            << ".{src,tgt,classes,fwords}\n";
  return kExitOk;
}

// --- wiring ----------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"attention counterfactual analysis toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  RunConfig config;

  // train ----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  std::vector<std::string> synth_entries;
  std::string train_out = "model.atcf";
  std::string train_curve;
  std::string train_config_file;
  train_cmd->add_option("--seed", config.seed, "run seed");
  train_cmd->add_option("--synth", synth_entries,
                        "synthetic corpus spec: pairs=N vocab=N seed=N")
      ->expected(-1);
  train_cmd->add_option("--src", config.source_path, "source side of a parallel corpus");
  train_cmd->add_option("--tgt", config.target_path, "target side of a parallel corpus");
  train_cmd->add_option("--max-len", config.max_len, "drop pairs with a longer side");
  train_cmd->add_option("--vocab-cap", config.vocab_cap, "vocabulary size cap per side");
  train_cmd->add_option("--emb", config.emb_dim, "embedding dimension");
  train_cmd->add_option("--hidden", config.hidden_dim, "recurrent hidden dimension");
  train_cmd->add_option("--layers", config.layers, "recurrent layers per direction");
  train_cmd->add_option("--lr", config.learning_rate, "Adam learning rate");
  train_cmd->add_option("--steps", config.steps, "optimizer steps");
  train_cmd->add_option("--batch", config.batch_size, "sentences per step");
  train_cmd->add_option("--clip", config.clip_norm, "global gradient-norm clip");
  train_cmd->add_option("--eval-interval", config.eval_interval, "steps between evaluations");
  train_cmd->add_option("--patience", config.patience,
                        "evaluations without improvement before stopping");
  train_cmd->add_option("--heldout", config.heldout_fraction, "held-out fraction");
  train_cmd->add_option("--function-words", config.function_words,
                        "function word list recorded for later analysis");
  train_cmd->add_option("--out", train_out, "checkpoint path");
  train_cmd->add_option("--curve", train_curve, "loss curve path (default: <out>.curve.tsv)");
  train_cmd->add_option("--config", train_config_file, "key=value config file; flags win");

  // translate ------------------------------------------------------------
  auto* translate_cmd = app.add_subcommand("translate", "greedy-decode sentences");
  std::string tr_ckpt, tr_src, tr_out;
  std::size_t tr_max_steps = 0;
  translate_cmd->add_option("ckpt", tr_ckpt, "checkpoint path")->required();
  translate_cmd->add_option("--src", tr_src, "source file (default: stdin)");
  translate_cmd->add_option("--out", tr_out, "output file (default: stdout)");
  translate_cmd->add_option("--max-steps", tr_max_steps, "decode step cap (0: 2m+5)");

  // analyze ---------------------------------------------------------------
  auto* analyze_cmd =
      app.add_subcommand("analyze", "attention substitution analysis over a corpus");
  std::string an_ckpt, an_src, an_methods = "all", an_out_dir = "analysis";
  std::string an_fwords, an_keepmax = "overLength", an_config_file;
  std::uint64_t an_seed = 0;
  std::size_t an_min_freq = 20, an_jobs = 1;
  bool an_force = false;
  analyze_cmd->add_option("ckpt", an_ckpt, "checkpoint path")->required();
  analyze_cmd->add_option("src", an_src, "source sentences, one per line")->required();
  auto* an_methods_opt =
      analyze_cmd->add_option("--methods", an_methods, "comma list or \"all\"");
  analyze_cmd->add_option("--out-dir", an_out_dir, "report directory");
  analyze_cmd->add_option("--function-words", an_fwords,
                          "function word list (default: from checkpoint config)");
  auto* an_seed_opt = analyze_cmd->add_option("--seed", an_seed, "run seed for permutations");
  auto* an_keepmax_opt =
      analyze_cmd->add_option("--keepmax-mode", an_keepmax, "overLength or overRemainder");
  auto* an_min_freq_opt = analyze_cmd->add_option(
      "--min-freq", an_min_freq, "coverage tables keep tokens with total > this");
  analyze_cmd->add_option("--jobs", an_jobs, "worker threads");
  analyze_cmd->add_option("--config", an_config_file,
                          "config file checked against the checkpoint snapshot");
  analyze_cmd->add_flag("--force", an_force, "proceed despite config mismatches");
  (void)an_methods_opt;

  // heatmap -----------------------------------------------------------------
  auto* heatmap_cmd = app.add_subcommand("heatmap", "render original vs substituted attention");
  std::string hm_ckpt, hm_text, hm_src, hm_method = "uniform", hm_out = "heatmap.svg";
  std::string hm_keepmax = "overLength";
  std::size_t hm_index = 0, hm_step = 0;
  std::uint64_t hm_seed = 0;
  heatmap_cmd->add_option("ckpt", hm_ckpt, "checkpoint path")->required();
  heatmap_cmd->add_option("--text", hm_text, "source sentence text");
  heatmap_cmd->add_option("--src", hm_src, "source file");
  heatmap_cmd->add_option("--index", hm_index, "sentence index within --src");
  heatmap_cmd->add_option("--step", hm_step, "decode step (0-based)");
  heatmap_cmd->add_option("--method", hm_method, "substitution method");
  heatmap_cmd->add_option("--out", hm_out, "SVG output path");
  auto* hm_seed_opt = heatmap_cmd->add_option("--seed", hm_seed, "run seed for permutations");
  heatmap_cmd->add_option("--keepmax-mode", hm_keepmax, "overLength or overRemainder");

  // synth ---------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic parallel corpus");
  std::size_t sy_pairs = 500, sy_vocab = 40;
  std::uint64_t sy_seed = 1;
  std::string sy_prefix = "synth";
  synth_cmd->add_option("--pairs", sy_pairs, "sentence pairs");
  synth_cmd->add_option("--content-vocab", sy_vocab, "distinct content words");
  synth_cmd->add_option("--seed", sy_seed, "generator seed");
  synth_cmd->add_option("--out-prefix", sy_prefix, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      if (!train_config_file.empty()) {
        std::set<std::string> given;
        for (const auto* opt : train_cmd->get_options()) {
          if (opt->count() > 0) {
            std::string name = opt->get_name();
            if (name.rfind("--", 0) == 0) name = name.substr(2);
            given.insert(name);
          }
        }
        const std::map<std::string, Setter> setters = {
            {"seed", [&](const std::string& v) { config.seed = parse_u64("seed", v); }},
            {"synth-pairs",
             [&](const std::string& v) { config.synth_pairs = parse_u64("synth-pairs", v); }},
            {"synth-vocab",
             [&](const std::string& v) { config.synth_vocab = parse_u64("synth-vocab", v); }},
            {"synth-seed",
             [&](const std::string& v) { config.synth_seed = parse_u64("synth-seed", v); }},
            {"src", [&](const std::string& v) { config.source_path = v; }},
            {"tgt", [&](const std::string& v) { config.target_path = v; }},
            {"max-len", [&](const std::string& v) { config.max_len = parse_u64("max-len", v); }},
            {"vocab-cap",
             [&](const std::string& v) { config.vocab_cap = parse_u64("vocab-cap", v); }},
            {"emb", [&](const std::string& v) { config.emb_dim = parse_u64("emb", v); }},
            {"hidden", [&](const std::string& v) { config.hidden_dim = parse_u64("hidden", v); }},
            {"layers", [&](const std::string& v) { config.layers = parse_u64("layers", v); }},
            {"lr", [&](const std::string& v) { config.learning_rate = parse_double("lr", v); }},
            {"steps", [&](const std::string& v) { config.steps = parse_u64("steps", v); }},
            {"batch", [&](const std::string& v) { config.batch_size = parse_u64("batch", v); }},
            {"clip", [&](const std::string& v) { config.clip_norm = parse_double("clip", v); }},
            {"eval-interval",
             [&](const std::string& v) { config.eval_interval = parse_u64("eval-interval", v); }},
            {"patience",
             [&](const std::string& v) { config.patience = parse_u64("patience", v); }},
            {"heldout",
             [&](const std::string& v) { config.heldout_fraction = parse_double("heldout", v); }},
            {"function-words", [&](const std::string& v) { config.function_words = v; }},
        };
        apply_config_file(train_config_file, setters, given);
      }
      if (!synth_entries.empty()) parse_synth_spec(synth_entries, config);
      if (!config.source_path.empty()) config.use_synth = false;
      if (config.steps == 0) throw ConfigError("steps must be positive");
      if (train_curve.empty()) train_curve = train_out + ".curve.tsv";
      return cmd_train(config, train_out, train_curve);
    }
    if (translate_cmd->parsed()) {
      return cmd_translate(tr_ckpt, tr_src, tr_out, tr_max_steps);
    }
    if (analyze_cmd->parsed()) {
      return cmd_analyze(an_ckpt, an_src, an_methods, an_out_dir, an_fwords, an_seed,
                         an_seed_opt->count() > 0, an_keepmax, an_keepmax_opt->count() > 0,
                         an_min_freq, an_min_freq_opt->count() > 0, an_jobs, an_config_file,
                         an_force);
    }
    if (heatmap_cmd->parsed()) {
      return cmd_heatmap(hm_ckpt, hm_text, hm_src, hm_index, hm_step, hm_method, hm_out, hm_seed,
                         hm_seed_opt->count() > 0, hm_keepmax);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(sy_pairs, sy_vocab, sy_seed, sy_prefix);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace attnscope

int main(int argc, char** argv) { return attnscope::run(argc, argv); }
