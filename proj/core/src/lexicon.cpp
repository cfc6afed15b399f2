#include "attnscope/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "attnscope/corpus.hpp"
#include "attnscope/errors.hpp"

namespace attnscope {

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

FunctionWordList FunctionWordList::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open function word list " + path);

  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string entry = trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    if (entry.find_first_of(" \t") != std::string::npos) {
      throw ConfigError("function word list entries must be single tokens: \"" + entry + "\"");
    }
    tokens.push_back(entry);
  }
  if (tokens.empty()) {
    throw ConfigError("function word list " + path + " has no entries");
  }
  return from_tokens(tokens, path);
}

FunctionWordList FunctionWordList::from_tokens(const std::vector<std::string>& tokens,
                                               std::string source_name) {
  if (tokens.empty()) throw ConfigError("function word list has no entries");
  FunctionWordList list;
  list.source_path_ = std::move(source_name);
  for (const std::string& t : tokens) list.words_.insert(lowercase(t));
  list.words_.insert(Vocab::kEosToken);
  return list;
}

WordClass FunctionWordList::classify(const std::string& token) const {
  return contains(token) ? WordClass::Function : WordClass::Content;
}

bool FunctionWordList::contains(const std::string& token) const {
  return words_.count(lowercase(token)) > 0;
}

}  // namespace attnscope
