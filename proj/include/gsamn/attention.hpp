#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "gsamn/ops.hpp"
#include "gsamn/rng.hpp"
#include "gsamn/tape.hpp"
#include "gsamn/tensor.hpp"

// Gated self-attention: scalar attention over raw dot products, a reference
// single-pair gate, and the vote-aggregated gate bank where every memory
// position and the controller emit gates from one jointly normalized score
// table.

namespace gsamn {

// Shared projection used on the key side of every gate within a hop.
struct GsamParams {
  Tensor W;  // [d x d]
  Tensor b;  // [d]

  static GsamParams init(Rng& rng, std::size_t d) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> w(d * d);
    for (double& v : w) v = rng.uniform(-bound, bound);
    GsamParams p{Tensor({d, d}, std::move(w), true), Tensor::zeros({d})};
    p.b.set_requires_grad(true);
    return p;
  }

  std::size_t dim() const { return W.dim(0); }

  void check(std::size_t d) const {
    if (W.rank() != 2 || W.dim(0) != W.dim(1))
      throw DimensionError("gate projection W must be square, got " + shape_str(W.shape()));
    if (W.dim(0) != d)
      throw DimensionError("gate projection W is " + shape_str(W.shape()) +
                           " but the embedding dimension is " + std::to_string(d));
    if (b.rank() != 1 || b.dim(0) != d)
      throw DimensionError("gate bias must be [" + std::to_string(d) + "], got " +
                           shape_str(b.shape()));
  }
};

// Raw scores and normalized weights for one query position, over the n
// memory positions plus the controller (detached copies, for inspection).
struct AttentionBreakdown {
  Tensor scores;   // [n+1]
  Tensor weights;  // [n+1], nonnegative, sums to 1
};

struct GateBank {
  Tensor gates;   // [n x d], one gate vector per memory position
  Tensor gate_c;  // [d], the controller's gate
  std::vector<AttentionBreakdown> breakdowns;  // n+1 entries; last is the controller's
};

namespace detail {

inline void check_context_memory(const Tensor& c, const Tensor& X) {
  if (c.rank() != 1)
    throw DimensionError("context must be rank-1, got " + shape_str(c.shape()));
  if (X.rank() != 2)
    throw DimensionError("memory must be rank-2, got " + shape_str(X.shape()));
  if (X.dim(1) != c.dim(0))
    throw DimensionError("memory " + shape_str(X.shape()) + " does not match context " +
                         shape_str(c.shape()));
}

// b tiled to [rows x d] differentiably (column sums flow back into b).
inline Tensor tile_bias(Tape& tape, const Tensor& b, std::size_t rows) {
  Tensor ones = Tensor::full({rows, 1}, 1.0);
  return matmul(tape, ones, reshape(tape, b, {1, b.dim(0)}));
}

}  // namespace detail

// Baseline attention: softmax over the raw dot products c . x_i.
inline Tensor traditional_attention(Tape& tape, const Tensor& c, const Tensor& X) {
  detail::check_context_memory(c, X);
  Tensor scores = matmul(tape, X, reshape(tape, c, {c.dim(0), 1}));  // [n x 1]
  return softmax(tape, reshape(tape, scores, {X.dim(0)}));
}

// Key-side projection: one vote per memory position plus the controller's.
struct Votes {
  Tensor V;    // [n x d]
  Tensor v_c;  // [d]
};

inline Votes project_votes(Tape& tape, const Tensor& X, const Tensor& c,
                           const GsamParams& params) {
  detail::check_context_memory(c, X);
  params.check(X.dim(1));
  const std::size_t n = X.dim(0), d = X.dim(1);
  Tensor all = concat(tape, X, reshape(tape, c, {1, d}), 0);  // [(n+1) x d]
  Tensor projected = add(tape, matmul(tape, all, transpose(tape, params.W)),
                         detail::tile_bias(tape, params.b, n + 1));
  return {slice_rows(tape, projected, 0, n),
          reshape(tape, slice_rows(tape, projected, n, n + 1), {d})};
}

// The full gate bank. Queries are the raw memory rows plus the controller;
// keys are the projected votes; values are again the raw rows plus the
// controller, so gate i = sigmoid(sum_j alpha_i^j x_j + alpha_i^c c) with all
// n+1 weights sharing one normalizer. When controller_self_score is off, the
// controller's own vote is excluded from its score list.
inline GateBank gsam_gates(Tape& tape, const Tensor& X, const Tensor& c, const GsamParams& params,
                           bool controller_self_score = true) {
  detail::check_context_memory(c, X);
  params.check(X.dim(1));
  const std::size_t n = X.dim(0), d = X.dim(1);

  Tensor all = concat(tape, X, reshape(tape, c, {1, d}), 0);  // [(n+1) x d]
  Tensor votes = add(tape, matmul(tape, all, transpose(tape, params.W)),
                     detail::tile_bias(tape, params.b, n + 1));
  Tensor scores = matmul(tape, all, transpose(tape, votes));  // [(n+1) x (n+1)]

  Tensor weights;
  if (controller_self_score) {
    weights = softmax_rows(tape, scores);
  } else {
    std::vector<bool> mask((n + 1) * (n + 1), true);
    mask[n * (n + 1) + n] = false;
    weights = softmax_rows(tape, scores, &mask);
  }

  Tensor aggregated = matmul(tape, weights, all);  // [(n+1) x d]
  Tensor gate_all = sigmoid(tape, aggregated);

  GateBank bank;
  bank.gates = slice_rows(tape, gate_all, 0, n);
  bank.gate_c = reshape(tape, slice_rows(tape, gate_all, n, n + 1), {d});
  bank.breakdowns.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    std::vector<double> s(scores.values().begin() + static_cast<std::ptrdiff_t>(i * (n + 1)),
                          scores.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * (n + 1)));
    std::vector<double> w(weights.values().begin() + static_cast<std::ptrdiff_t>(i * (n + 1)),
                          weights.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * (n + 1)));
    bank.breakdowns.push_back({Tensor({n + 1}, std::move(s)), Tensor({n + 1}, std::move(w))});
  }
  return bank;
}

// Reference single-pair gate sigmoid(Wx + Wc + b). Documented variant only;
// the memory network never calls it.
inline Tensor simple_gate(Tape& tape, const Tensor& c, const Tensor& x, const GsamParams& params) {
  if (x.rank() != 1 || c.rank() != 1 || x.dim(0) != c.dim(0))
    throw DimensionError("simple_gate wants two equal-length vectors, got " +
                         shape_str(c.shape()) + " and " + shape_str(x.shape()));
  params.check(x.dim(0));
  const std::size_t d = x.dim(0);
  Tensor sum = add(tape, reshape(tape, x, {1, d}), reshape(tape, c, {1, d}));
  Tensor pre = add(tape, matmul(tape, sum, transpose(tape, params.W)),
                   reshape(tape, params.b, {1, d}));
  return reshape(tape, sigmoid(tape, pre), {d});
}

}  // namespace gsamn
