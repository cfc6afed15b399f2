#include "attnscope/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "attnscope/rng.hpp"

namespace attnscope {

namespace {

bool is_split_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == '"' || c == ';' || c == ':';
}

char lower_ascii(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + ('a' - 'A')) : c;
}

void emit_word(const std::string& word, std::vector<std::string>& out) {
  std::size_t begin = 0, end = word.size();
  while (begin < end && is_split_punct(word[begin])) {
    out.emplace_back(1, word[begin]);
    ++begin;
  }
  std::vector<std::string> trailing;
  while (end > begin && is_split_punct(word[end - 1])) {
    trailing.emplace_back(1, word[end - 1]);
    --end;
  }
  if (begin < end) out.push_back(word.substr(begin, end - begin));
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string word;
  for (char raw : line) {
    const unsigned char u = static_cast<unsigned char>(raw);
    if (u < 0x80 && std::isspace(u)) {
      if (!word.empty()) {
        emit_word(word, out);
        word.clear();
      }
    } else {
      word.push_back(lower_ascii(raw));
    }
  }
  if (!word.empty()) emit_word(word, out);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// --- Vocab -------------------------------------------------------------------

Vocab Vocab::build(const std::vector<SentencePair>& pairs, Side side, std::size_t max_size) {
  if (max_size < 5) {
    throw ConfigError("vocab max_size must be at least 5 to fit the reserved tokens, got " +
                      std::to_string(max_size));
  }
  if (pairs.empty()) throw ContractError("build_vocab: empty corpus");

  // std::map keeps the tie-break scan lexicographic without an extra sort key.
  std::map<std::string, std::size_t> freq;
  for (const SentencePair& p : pairs) {
    const auto& toks = side == Side::Source ? p.source : p.target;
    for (const std::string& t : toks) ++freq[t];
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  v.max_size_ = max_size;
  v.id_to_token_ = {kPadToken, kUnkToken, kBosToken, kEosToken};
  for (const auto& [tok, n] : ranked) {
    (void)n;
    if (v.id_to_token_.size() >= max_size) break;
    v.id_to_token_.push_back(tok);
  }
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    v.token_to_id_[v.id_to_token_[i]] = static_cast<int>(i);
  }
  return v;
}

Vocab Vocab::from_table(std::vector<std::string> id_to_token, std::size_t max_size) {
  if (id_to_token.size() < 4 || id_to_token[0] != kPadToken || id_to_token[1] != kUnkToken ||
      id_to_token[2] != kBosToken || id_to_token[3] != kEosToken) {
    throw FormatError("vocab table is missing the reserved token prefix");
  }
  Vocab v;
  v.max_size_ = max_size;
  v.id_to_token_ = std::move(id_to_token);
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    v.token_to_id_[v.id_to_token_[i]] = static_cast<int>(i);
  }
  return v;
}

int Vocab::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

std::vector<int> Vocab::encode_all(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(encode(t));
  return ids;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw ContractError("vocab: id " + std::to_string(id) + " out of range (size " +
                        std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

// --- parallel loading ---------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const std::string& path) {
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

}  // namespace

ParallelCorpus load_parallel(const std::string& source_path, const std::string& target_path,
                             std::size_t max_len) {
  const auto src_lines = read_lines(source_path);
  const auto tgt_lines = read_lines(target_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw FormatError("parallel files are not aligned: " + source_path + " has " +
                      std::to_string(src_lines.size()) + " lines, " + target_path + " has " +
                      std::to_string(tgt_lines.size()));
  }
  ParallelCorpus out;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    SentencePair pair{tokenize(src_lines[i]), tokenize(tgt_lines[i])};
    if (pair.source.empty() || pair.target.empty()) {
      ++out.dropped_empty;
      continue;
    }
    if (pair.source.size() > max_len || pair.target.size() > max_len) {
      ++out.dropped_too_long;
      continue;
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

// --- synthetic corpus ----------------------------------------------------------

namespace {

constexpr std::array<const char*, 20> kSourceSyllables = {
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
    "ga", "ge", "gi", "go", "gu", "ka", "ke", "ki", "ko", "ku"};

constexpr std::array<const char*, 20> kTargetSyllables = {
    "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu",
    "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su"};

template <std::size_t N>
std::string spell(std::size_t index, const std::array<const char*, N>& syllables) {
  // two syllables cover indices < N*N, a third syllable extends the space
  std::string word = syllables[index % N];
  word += syllables[(index / N) % N];
  if (index >= N * N) word += syllables[(index / (N * N)) % N];
  return word;
}

}  // namespace

std::string synth_source_token(std::size_t index) { return spell(index, kSourceSyllables); }
std::string synth_target_token(std::size_t index) { return spell(index, kTargetSyllables); }

std::vector<std::string> synth_function_tokens() {
  return {kSynthLead, kSynthSep, kSynthTerminator};
}

SynthCorpus synth_corpus(const SynthSpec& spec) {
  if (spec.pairs == 0 || spec.content_vocab == 0) {
    throw ConfigError("synth_corpus: pair and vocabulary counts must be positive");
  }
  if (spec.content_vocab > kSynthMaxContentVocab) {
    throw ConfigError("synth_corpus: content vocabulary " + std::to_string(spec.content_vocab) +
                      " exceeds the available symbol space of " +
                      std::to_string(kSynthMaxContentVocab));
  }

  Rng rng(mix_seed({spec.seed, 0x53594e5448ULL}));
  SynthCorpus corpus;
  corpus.pairs.reserve(spec.pairs);
  corpus.target_classes.reserve(spec.pairs);
  for (std::size_t p = 0; p < spec.pairs; ++p) {
    const std::size_t k =
        kSynthMinWords + rng.uniform_index(kSynthMaxWords - kSynthMinWords + 1);
    SentencePair pair;
    std::vector<char> classes;
    pair.target.push_back(kSynthLead);
    classes.push_back('F');
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t w = rng.uniform_index(spec.content_vocab);
      pair.source.push_back(synth_source_token(w));
      if (i > 0) {
        pair.target.push_back(kSynthSep);
        classes.push_back('F');
      }
      pair.target.push_back(synth_target_token(w));
      classes.push_back('C');
    }
    pair.source.push_back(kSynthTerminator);
    pair.target.push_back(kSynthTerminator);
    classes.push_back('F');
    corpus.pairs.push_back(std::move(pair));
    corpus.target_classes.push_back(std::move(classes));
  }
  return corpus;
}

}  // namespace attnscope
