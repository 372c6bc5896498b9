#pragma once

#include <cctype>
#include <string>
#include <vector>

namespace gsamn {

// Lowercasing word tokenizer: maximal runs of alphanumerics (plus any byte
// outside ASCII, so UTF-8 sequences stay glued together) form word tokens,
// every other printable character becomes a single-character token, and
// whitespace only separates. Angle brackets always split off, so no input
// text can collide with the reserved "<unk>"/"<sep>" vocabulary entries.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char ch : text) {
    const bool wordy = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                       (ch >= '0' && ch <= '9') || ch >= 0x80;
    if (wordy) {
      word.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a')
                                            : static_cast<char>(ch));
    } else {
      flush();
      if (!std::isspace(ch)) out.push_back(std::string(1, static_cast<char>(ch)));
    }
  }
  flush();
  return out;
}

}  // namespace gsamn
