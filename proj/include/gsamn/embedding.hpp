#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsamn/errors.hpp"
#include "gsamn/rng.hpp"
#include "gsamn/tensor.hpp"
#include "gsamn/tokenizer.hpp"

namespace gsamn {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kSepToken = "<sep>";

// Token -> row index mapping. The reserved entries are always present and
// always the last two rows, in the order <unk>, <sep>.
struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::size_t> index;

  static Vocab from_tokens(std::vector<std::string> base) {
    Vocab v;
    v.tokens = std::move(base);
    v.tokens.push_back(kUnkToken);
    v.tokens.push_back(kSepToken);
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
      if (!v.index.emplace(v.tokens[i], i).second)
        throw DataError("duplicate vocabulary token: " + v.tokens[i]);
    }
    return v;
  }

  // Sorted unique word tokens drawn from a text corpus.
  static Vocab from_texts(const std::vector<std::string>& texts) {
    std::set<std::string> uniq;
    for (const auto& t : texts)
      for (auto& tok : tokenize(t)) uniq.insert(std::move(tok));
    return from_tokens(std::vector<std::string>(uniq.begin(), uniq.end()));
  }

  std::size_t size() const { return tokens.size(); }
  std::size_t unk_id() const { return tokens.size() - 2; }
  std::size_t sep_id() const { return tokens.size() - 1; }

  std::size_t id_of(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? unk_id() : it->second;
  }

  // Stable content fingerprint (FNV-1a over newline-joined tokens).
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char byte) {
      h ^= byte;
      h *= 0x100000001b3ULL;
    };
    for (const auto& t : tokens) {
      for (unsigned char ch : t) mix(ch);
      mix('\n');
    }
    return h;
  }
};

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

enum class EmbeddingMode { random_trainable, file_frozen, file_trainable };

inline std::string to_string(EmbeddingMode m) {
  switch (m) {
    case EmbeddingMode::random_trainable: return "random_trainable";
    case EmbeddingMode::file_frozen: return "file_frozen";
    case EmbeddingMode::file_trainable: return "file_trainable";
  }
  throw ContractError("unreachable embedding mode");
}

inline EmbeddingMode embedding_mode_from(const std::string& s) {
  if (s == "random_trainable") return EmbeddingMode::random_trainable;
  if (s == "file_frozen") return EmbeddingMode::file_frozen;
  if (s == "file_trainable") return EmbeddingMode::file_trainable;
  throw ConfigError("unknown embedding mode: " + s);
}

// Word-vector text file: one line per token ("token v1 v2 ... vd"), with an
// optional "V d" count header on the first line (auto-detected).
struct EmbeddingFile {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> rows;
  std::size_t d = 0;
};

inline EmbeddingFile load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);
  EmbeddingFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (lineno == 1 && vals.size() == 1 && !token.empty() &&
        token.find_first_not_of("0123456789") == std::string::npos) {
      continue;  // "V d" header
    }
    if (vals.empty())
      throw DataError(path + " line " + std::to_string(lineno) + ": no embedding values");
    if (file.d == 0) file.d = vals.size();
    if (vals.size() != file.d)
      throw DataError(path + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(file.d) + " values, got " + std::to_string(vals.size()));
    file.tokens.push_back(token);
    file.rows.push_back(std::move(vals));
  }
  if (file.tokens.empty()) throw DataError("embedding file has no entries: " + path);
  return file;
}

// Vocabulary plus the [V x d] table, with the row-freezing policy of the
// chosen mode. In file_frozen mode only the reserved rows keep training
// (the file supplies no vectors for them).
struct EmbeddingProvider {
  EmbeddingMode mode = EmbeddingMode::random_trainable;
  Vocab vocab;
  Tensor table;  // [V x d]

  static EmbeddingProvider random_init(Vocab vocab, std::size_t d, Rng& rng) {
    EmbeddingProvider p;
    p.mode = EmbeddingMode::random_trainable;
    p.vocab = std::move(vocab);
    std::vector<double> vals(p.vocab.size() * d);
    for (double& v : vals) v = rng.uniform(-0.1, 0.1);
    p.table = Tensor({p.vocab.size(), d}, std::move(vals), true);
    return p;
  }

  static EmbeddingProvider from_file(const EmbeddingFile& file, EmbeddingMode mode, Rng& rng) {
    if (mode == EmbeddingMode::random_trainable)
      throw ConfigError("file-based provider needs a file mode");
    for (const auto& t : file.tokens)
      if (t == kUnkToken || t == kSepToken)
        throw DataError("embedding file must not define the reserved token " + t);
    EmbeddingProvider p;
    p.mode = mode;
    p.vocab = Vocab::from_tokens(file.tokens);
    const std::size_t d = file.d;
    std::vector<double> vals(p.vocab.size() * d);
    for (std::size_t i = 0; i < file.rows.size(); ++i)
      std::copy(file.rows[i].begin(), file.rows[i].end(), vals.begin() + static_cast<std::ptrdiff_t>(i * d));
    for (std::size_t i = file.rows.size() * d; i < vals.size(); ++i)
      vals[i] = rng.uniform(-0.1, 0.1);  // reserved rows are learned from scratch
    p.table = Tensor({p.vocab.size(), d}, std::move(vals), true);
    return p;
  }

  std::size_t dim() const { return table.dim(1); }

  // Rows the optimizer may update; empty means every row.
  std::vector<std::size_t> trainable_rows() const {
    if (mode == EmbeddingMode::file_frozen) return {vocab.unk_id(), vocab.sep_id()};
    return {};
  }

  // Weight decay never touches the reserved rows of a frozen table; in the
  // trainable modes the whole table is an ordinary weight matrix.
  bool decays() const { return mode != EmbeddingMode::file_frozen; }
};

}  // namespace gsamn
