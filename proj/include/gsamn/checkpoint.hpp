#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsamn/errors.hpp"
#include "gsamn/model.hpp"

// Versioned binary checkpoint: magic "GSMN", little-endian u32 format
// version, length-prefixed canonical-JSON config document, then named blocks
// of raw little-endian doubles, sorted by name. Unknown blocks survive a
// load/save round trip untouched, so files are byte-stable.

namespace gsamn {

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  nlohmann::json config;
  std::map<std::string, std::vector<double>> blocks;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  void need(std::size_t n) const {
    if (pos_ + n > size_)
      throw CheckpointError(CheckpointError::Kind::corrupt,
                            "checkpoint truncated: wanted " + std::to_string(n) +
                                " more bytes at offset " + std::to_string(pos_));
  }
  bool done() const { return pos_ == size_; }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::uint64_t count) {
    if (count > (size_ - pos_) / 8)
      throw CheckpointError(CheckpointError::Kind::corrupt,
                            "checkpoint block claims " + std::to_string(count) +
                                " values but the file is too small");
    std::vector<double> out(count);
    for (auto& d : out) d = std::bit_cast<double>(u64());
    return out;
  }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += "GSMN";
  detail::put_u32(out, Checkpoint::kVersion);
  const std::string config = ckpt.config.dump();
  detail::put_u64(out, config.size());
  out += config;
  for (const auto& [name, values] : ckpt.blocks) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u64(out, values.size());
    for (double d : values) detail::put_f64(out, d);
  }
  return out;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot open for writing: " + path);
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "short write to " + path);
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
  detail::Reader r(bytes.data(), bytes.size());
  if (r.bytes(4) != "GSMN")
    throw CheckpointError(CheckpointError::Kind::corrupt, "bad magic bytes (not a checkpoint)");
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          "checkpoint format version " + std::to_string(version) +
                              ", this build reads version " + std::to_string(Checkpoint::kVersion));
  Checkpoint ckpt;
  const std::uint64_t config_len = r.u64();
  const std::string config_text = r.bytes(config_len);
  ckpt.config = nlohmann::json::parse(config_text, nullptr, false);
  if (ckpt.config.is_discarded())
    throw CheckpointError(CheckpointError::Kind::corrupt, "config block is not valid JSON");
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint64_t count = r.u64();
    if (!ckpt.blocks.emplace(name, r.doubles(count)).second)
      throw CheckpointError(CheckpointError::Kind::corrupt, "duplicate block: " + name);
  }
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw CheckpointError(CheckpointError::Kind::io, "read failure on " + path);
  return parse_checkpoint(bytes);
}

inline Checkpoint checkpoint_from_model(const Model& model) {
  Checkpoint ckpt;
  nlohmann::json cfg;
  cfg["d"] = model.config.d;
  cfg["hops"] = model.config.hops;
  cfg["share_params_across_hops"] = model.config.share_params_across_hops;
  cfg["controller_self_score"] = model.config.controller_self_score;
  cfg["max_seq_len"] = model.max_seq_len;
  cfg["embedding_mode"] = to_string(model.embedding.mode);
  cfg["vocab"] = model.embedding.vocab.tokens;
  cfg["vocab_hash"] = hash_hex(model.embedding.vocab.hash());
  ckpt.config = std::move(cfg);
  for (const auto& p : model.named_params()) ckpt.blocks[p.name] = p.tensor.values();
  return ckpt;
}

namespace detail {

template <typename T>
T config_field(const nlohmann::json& cfg, const char* key) {
  if (!cfg.contains(key))
    throw CheckpointError(CheckpointError::Kind::corrupt,
                          std::string("checkpoint config lacks \"") + key + "\"");
  try {
    return cfg.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(CheckpointError::Kind::corrupt,
                          std::string("checkpoint config field \"") + key + "\" has the wrong type");
  }
}

inline std::vector<double> take_block(const Checkpoint& ckpt, const std::string& name,
                                      std::size_t want) {
  auto it = ckpt.blocks.find(name);
  if (it == ckpt.blocks.end())
    throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint lacks block " + name);
  if (it->second.size() != want)
    throw CheckpointError(CheckpointError::Kind::corrupt,
                          "block " + name + " holds " + std::to_string(it->second.size()) +
                              " values, expected " + std::to_string(want));
  return it->second;
}

}  // namespace detail

// Structural compatibility between a checkpoint and the configuration of the
// run that wants to adopt it.
inline void check_checkpoint_compatible(const Checkpoint& ckpt, const GsamnConfig& config,
                                        std::size_t max_seq_len) {
  std::string diffs;
  auto expect = [&diffs](const char* field, auto have, auto want) {
    if (!(have == want))
      diffs += std::string(diffs.empty() ? "" : ", ") + field;
  };
  expect("d", detail::config_field<std::size_t>(ckpt.config, "d"), config.d);
  expect("hops", detail::config_field<std::size_t>(ckpt.config, "hops"), config.hops);
  expect("share_params_across_hops",
         detail::config_field<bool>(ckpt.config, "share_params_across_hops"),
         config.share_params_across_hops);
  expect("controller_self_score",
         detail::config_field<bool>(ckpt.config, "controller_self_score"),
         config.controller_self_score);
  expect("max_seq_len", detail::config_field<std::size_t>(ckpt.config, "max_seq_len"),
         max_seq_len);
  if (!diffs.empty())
    throw CheckpointError(CheckpointError::Kind::config_mismatch,
                          "checkpoint disagrees with the run configuration on: " + diffs);
}

// Full reconstruction: the checkpoint defines vocabulary, mode, and weights.
inline Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m;
  m.config.d = detail::config_field<std::size_t>(ckpt.config, "d");
  m.config.hops = detail::config_field<std::size_t>(ckpt.config, "hops");
  m.config.share_params_across_hops =
      detail::config_field<bool>(ckpt.config, "share_params_across_hops");
  m.config.controller_self_score =
      detail::config_field<bool>(ckpt.config, "controller_self_score");
  m.max_seq_len = detail::config_field<std::size_t>(ckpt.config, "max_seq_len");
  m.config.check();

  auto tokens = detail::config_field<std::vector<std::string>>(ckpt.config, "vocab");
  const auto stored_hash = detail::config_field<std::string>(ckpt.config, "vocab_hash");
  if (tokens.size() < 2 ||
      tokens[tokens.size() - 2] != kUnkToken || tokens.back() != kSepToken)
    throw CheckpointError(CheckpointError::Kind::corrupt,
                          "checkpoint vocabulary lacks the reserved trailing tokens");
  m.embedding.mode =
      embedding_mode_from(detail::config_field<std::string>(ckpt.config, "embedding_mode"));
  tokens.pop_back();
  tokens.pop_back();
  Vocab v;
  try {
    v = Vocab::from_tokens(std::move(tokens));
  } catch (const DataError& e) {
    throw CheckpointError(CheckpointError::Kind::corrupt, e.what());
  }
  if (hash_hex(v.hash()) != stored_hash)
    throw CheckpointError(CheckpointError::Kind::corrupt,
                          "stored vocabulary hash does not match the stored tokens");
  m.embedding.vocab = std::move(v);

  const std::size_t d = m.config.d, vsize = m.embedding.vocab.size();
  m.embedding.table =
      Tensor({vsize, d}, detail::take_block(ckpt, "embedding", vsize * d), true);
  const std::size_t sets = m.config.share_params_across_hops ? 1 : m.config.hops;
  for (std::size_t i = 0; i < sets; ++i) {
    const std::string prefix = "gate." + std::to_string(i) + ".";
    GsamParams g{Tensor({d, d}, detail::take_block(ckpt, prefix + "W", d * d), true),
                 Tensor({d}, detail::take_block(ckpt, prefix + "b", d), true)};
    m.gates.push_back(std::move(g));
  }
  m.classifier = {Tensor({1, d}, detail::take_block(ckpt, "classifier.W", d), true),
                  Tensor({1}, detail::take_block(ckpt, "classifier.b", 1), true)};
  m.c0 = Tensor({d}, detail::take_block(ckpt, "c0", d), true);
  return m;
}

// Vocabulary-remapping transfer: `base` keeps its own vocabulary and fresh
// initialization; every non-embedding parameter is adopted from the
// checkpoint, and embedding rows are copied for tokens the vocabularies
// share. Structural compatibility must already hold.
inline Model remap_from_checkpoint(const Model& base, const Checkpoint& ckpt) {
  check_checkpoint_compatible(ckpt, base.config, base.max_seq_len);
  Model donor = model_from_checkpoint(ckpt);
  Model out = base.clone();
  const std::size_t d = out.config.d;
  for (std::size_t i = 0; i < donor.embedding.vocab.size(); ++i) {
    const std::string& tok = donor.embedding.vocab.tokens[i];
    auto it = out.embedding.vocab.index.find(tok);
    if (it == out.embedding.vocab.index.end()) continue;
    for (std::size_t k = 0; k < d; ++k)
      out.embedding.table.data().values[it->second * d + k] = donor.embedding.table.at(i, k);
  }
  for (std::size_t s = 0; s < out.gates.size(); ++s) {
    out.gates[s].W.data().values = donor.gates[s].W.values();
    out.gates[s].b.data().values = donor.gates[s].b.values();
  }
  out.classifier.W.data().values = donor.classifier.W.values();
  out.classifier.b.data().values = donor.classifier.b.values();
  out.c0.data().values = donor.c0.values();
  return out;
}

}  // namespace gsamn
