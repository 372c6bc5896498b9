#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gsamn/embedding.hpp"
#include "gsamn/network.hpp"
#include "gsamn/ops.hpp"
#include "gsamn/tokenizer.hpp"

namespace gsamn {

struct ClassifierParams {
  Tensor W;  // [1 x d]
  Tensor b;  // [1]

  static ClassifierParams init(Rng& rng, std::size_t d) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> w(d);
    for (double& v : w) v = rng.uniform(-bound, bound);
    ClassifierParams c{Tensor({1, d}, std::move(w), true), Tensor::zeros({1})};
    c.b.set_requires_grad(true);
    return c;
  }

  void check(std::size_t d) const {
    if (W.rank() != 2 || W.dim(0) != 1 || W.dim(1) != d)
      throw DimensionError("classifier weight must be [1x" + std::to_string(d) + "], got " +
                           shape_str(W.shape()));
    if (b.rank() != 1 || b.dim(0) != 1)
      throw DimensionError("classifier bias must be [1], got " + shape_str(b.shape()));
  }
};

// Probability that the sequence behind (X0, c0) is a matching pair: run the
// memory network, read the final controller through the linear classifier,
// squash. Exposed separately from the model so fixed-weight instances can be
// driven directly in tests.
inline Tensor score_sequence(Tape& tape, const Tensor& X0, const Tensor& c0,
                             const GsamnConfig& config, const HopParams& gates,
                             const ClassifierParams& classifier) {
  classifier.check(config.d);
  GsamnRun run = run_gsamn(tape, X0, c0, config, gates);
  Tensor logit = matmul(tape, classifier.W, reshape(tape, run.c_final, {config.d, 1}));
  return sigmoid(tape, add(tape, reshape(tape, logit, {1}), classifier.b));
}

// Binary cross-entropy with the probability clamped away from 0/1 before the
// logarithm.
inline Tensor bce_loss(Tape& tape, const Tensor& p, int label) {
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1");
  if (p.numel() != 1) throw ContractError("bce_loss expects a scalar probability");
  Tensor safe = clamp(tape, p, 1e-7, 1.0 - 1e-7);
  if (label == 1) return scale(tape, log(tape, safe), -1.0);
  Tensor one_minus = add_scalar(tape, scale(tape, safe, -1.0), 1.0);
  return scale(tape, log(tape, one_minus), -1.0);
}

// One trainable tensor plus its optimizer-facing policy.
struct NamedParam {
  std::string name;
  Tensor tensor;
  bool decay = true;                        // decoupled weight decay applies
  std::vector<std::size_t> trainable_rows;  // empty = all rows (rank-2 only)
};

struct Model {
  GsamnConfig config;
  std::size_t max_seq_len = 64;
  EmbeddingProvider embedding;
  HopParams gates;
  ClassifierParams classifier;
  Tensor c0;  // learned initial controller, shared by every example

  // Fresh model around an existing embedding provider. The provider is built
  // first (its draws come first) so the remaining draw order is identical for
  // random- and file-initialized models.
  static Model fresh(const GsamnConfig& config, std::size_t max_seq_len,
                     EmbeddingProvider embedding, Rng& rng) {
    config.check();
    if (embedding.dim() != config.d)
      throw ConfigError("embedding dimension " + std::to_string(embedding.dim()) +
                        " does not match configured dimension " + std::to_string(config.d));
    if (max_seq_len < 1) throw ConfigError("max_seq_len must be at least 1");
    Model m;
    m.config = config;
    m.max_seq_len = max_seq_len;
    m.embedding = std::move(embedding);
    m.gates = init_hop_params(rng, config);
    m.classifier = ClassifierParams::init(rng, config.d);
    std::vector<double> c(config.d);
    for (double& v : c) v = rng.uniform(-0.1, 0.1);
    m.c0 = Tensor({config.d}, std::move(c), true);
    return m;
  }

  static Model fresh_random(const GsamnConfig& config, std::size_t max_seq_len, Vocab vocab,
                            std::uint64_t seed) {
    Rng rng(seed);
    return fresh(config, max_seq_len, EmbeddingProvider::random_init(std::move(vocab), config.d, rng),
                 rng);
  }

  // Token ids for the concatenated sequence [question, <sep>, answer],
  // truncated to max_seq_len by dropping answer tokens first, then question
  // tokens, always keeping the separator.
  std::vector<std::size_t> sequence_ids(const std::vector<std::string>& question,
                                        const std::vector<std::string>& answer) const {
    if (question.empty() && answer.empty())
      throw EmptyInputError("both question and answer are empty");
    std::size_t m = question.size(), k = answer.size();
    while (m + 1 + k > max_seq_len) {
      if (k > 0)
        --k;
      else if (m > 0)
        --m;
      else
        break;
    }
    std::vector<std::size_t> ids;
    ids.reserve(m + 1 + k);
    for (std::size_t i = 0; i < m; ++i) ids.push_back(embedding.vocab.id_of(question[i]));
    ids.push_back(embedding.vocab.sep_id());
    for (std::size_t i = 0; i < k; ++i) ids.push_back(embedding.vocab.id_of(answer[i]));
    return ids;
  }

  struct Encoded {
    Tensor X0;  // [n x d]
    Tensor c0;  // [d]
  };

  Encoded encode_pair(Tape& tape, const std::vector<std::string>& question,
                      const std::vector<std::string>& answer) const {
    return {take_rows(tape, embedding.table, sequence_ids(question, answer)), c0};
  }

  Tensor score_pair(Tape& tape, const std::vector<std::string>& question,
                    const std::vector<std::string>& answer) const {
    Encoded enc = encode_pair(tape, question, answer);
    return score_sequence(tape, enc.X0, enc.c0, config, gates, classifier);
  }

  Tensor score_text(Tape& tape, const std::string& question, const std::string& answer) const {
    return score_pair(tape, tokenize(question), tokenize(answer));
  }

  std::vector<NamedParam> named_params() const {
    std::vector<NamedParam> out;
    out.push_back({"embedding", embedding.table, embedding.decays(), embedding.trainable_rows()});
    for (std::size_t i = 0; i < gates.size(); ++i) {
      const std::string prefix = "gate." + std::to_string(i) + ".";
      out.push_back({prefix + "W", gates[i].W, true, {}});
      out.push_back({prefix + "b", gates[i].b, false, {}});
    }
    out.push_back({"classifier.W", classifier.W, true, {}});
    out.push_back({"classifier.b", classifier.b, false, {}});
    out.push_back({"c0", c0, true, {}});
    return out;
  }

  // Deep copy with independent storage (for best-state snapshots).
  Model clone() const {
    Model m;
    m.config = config;
    m.max_seq_len = max_seq_len;
    m.embedding.mode = embedding.mode;
    m.embedding.vocab = embedding.vocab;
    m.embedding.table = embedding.table.clone();
    for (const auto& g : gates) m.gates.push_back({g.W.clone(), g.b.clone()});
    m.classifier = {classifier.W.clone(), classifier.b.clone()};
    m.c0 = c0.clone();
    return m;
  }
};

}  // namespace gsamn
