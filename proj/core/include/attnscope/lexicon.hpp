#pragma once

#include <string>
#include <unordered_set>
#include <vector>

namespace attnscope {

enum class WordClass { Function, Content };

inline char class_letter(WordClass c) { return c == WordClass::Function ? 'F' : 'C'; }

// Closed set of lowercase function words. The EOS marker is always a member:
// end-of-sentence behaves like a function word for classification purposes.
class FunctionWordList {
 public:
  // File format: one token per line, '#' starts a comment line, blank lines
  // ignored. Entries are lowercased and deduplicated.
  static FunctionWordList load(const std::string& path);
  static FunctionWordList from_tokens(const std::vector<std::string>& tokens,
                                      std::string source_name = "<memory>");

  WordClass classify(const std::string& token) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return words_.size(); }
  const std::string& source_path() const { return source_path_; }

 private:
  std::unordered_set<std::string> words_;
  std::string source_path_;
};

}  // namespace attnscope
