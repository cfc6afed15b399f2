#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "attnscope/errors.hpp"

namespace attnscope {

// Lowercases, splits on whitespace, and peels leading/trailing punctuation
// (. , ! ? " ; :) off into separate tokens. Idempotent on its own output.
// Whitespace-only input yields an empty list.
std::vector<std::string> tokenize(const std::string& line);

std::string join_tokens(const std::vector<std::string>& tokens);

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// Token table with four reserved entries. Built by frequency (ties broken
// lexicographically); tokens that do not fit under max_size encode as UNK.
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kBosId = 2;
  static constexpr int kEosId = 3;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr const char* kBosToken = "<bos>";
  static constexpr const char* kEosToken = "<eos>";

  enum class Side { Source, Target };

  static Vocab build(const std::vector<SentencePair>& pairs, Side side, std::size_t max_size);
  // Reconstructs a vocab from a stored id->token table (checkpoint load).
  static Vocab from_table(std::vector<std::string> id_to_token, std::size_t max_size);

  int encode(const std::string& token) const;
  std::vector<int> encode_all(const std::vector<std::string>& tokens) const;
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  std::size_t max_size() const { return max_size_; }
  const std::vector<std::string>& table() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  std::size_t max_size_ = 0;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::size_t dropped_too_long = 0;
  std::size_t dropped_empty = 0;
};

// Loads two line-aligned plain-text files (UTF-8, LF or CRLF). Pairs with
// either side longer than max_len tokens are dropped and counted.
ParallelCorpus load_parallel(const std::string& source_path, const std::string& target_path,
                             std::size_t max_len);

// --- synthetic corpus -------------------------------------------------------
//
// Desk-scale generator. Sources are k content words (k in [2,8]) plus a
// terminator; targets interleave a fixed bijective word mapping with tokens
// that are predictable from the target prefix alone ("the" first, "sep"
// between words, terminator last). That split gives the corpus a known
// function-like / content-like structure.

inline constexpr const char* kSynthLead = "the";
inline constexpr const char* kSynthSep = "sep";
inline constexpr const char* kSynthTerminator = "▸";  // ▸
inline constexpr std::size_t kSynthMaxContentVocab = 8000;
inline constexpr std::size_t kSynthMinWords = 2;
inline constexpr std::size_t kSynthMaxWords = 8;

std::string synth_source_token(std::size_t index);
std::string synth_target_token(std::size_t index);

struct SynthSpec {
  std::size_t pairs = 500;
  std::size_t content_vocab = 40;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  std::vector<SentencePair> pairs;
  // Per pair, one 'F'/'C' label per target token.
  std::vector<std::vector<char>> target_classes;
};

SynthCorpus synth_corpus(const SynthSpec& spec);

// The function-like tokens of the synthetic target grammar (terminator
// included); handy for building a lexicon that matches a synthetic run.
std::vector<std::string> synth_function_tokens();

}  // namespace attnscope
