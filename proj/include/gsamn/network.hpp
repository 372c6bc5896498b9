#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gsamn/attention.hpp"
#include "gsamn/ops.hpp"
#include "gsamn/tape.hpp"
#include "gsamn/tensor.hpp"

// Multi-hop memory network. Each hop gates every memory cell and the
// controller from a snapshot of the current state, then averages the freshly
// gated cells into the controller.

namespace gsamn {

struct MemoryState {
  Tensor c;        // controller, [d]
  Tensor X;        // memory cells, [n x d]; n never changes across hops
  std::size_t hop = 0;
};

struct GsamnConfig {
  std::size_t hops = 2;
  std::size_t d = 0;
  bool share_params_across_hops = true;
  bool controller_self_score = true;

  void check() const {
    if (hops < 1) throw ConfigError("hop count must be at least 1");
    if (d < 1) throw ConfigError("embedding dimension must be at least 1");
  }
};

// One parameter set when shared across hops, otherwise one per hop.
using HopParams = std::vector<GsamParams>;

inline HopParams init_hop_params(Rng& rng, const GsamnConfig& config) {
  config.check();
  HopParams params;
  const std::size_t sets = config.share_params_across_hops ? 1 : config.hops;
  for (std::size_t i = 0; i < sets; ++i) params.push_back(GsamParams::init(rng, config.d));
  return params;
}

inline void check_hop_params(const HopParams& params, const GsamnConfig& config) {
  const std::size_t want = config.share_params_across_hops ? 1 : config.hops;
  if (params.size() != want)
    throw ConfigError("expected " + std::to_string(want) + " gate parameter set(s), got " +
                      std::to_string(params.size()));
  for (const auto& p : params) p.check(config.d);
}

inline std::size_t num_parameters(const HopParams& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.W.numel() + p.b.numel();
  return n;
}

// Synchronous update: all gates are computed from the hop-k snapshot, then
//   x_i <- g_i (*) x_i,   c <- g_c (*) c + mean_i(updated x_i).
// Memory emptiness is unrepresentable (tensor dimensions are positive), so
// the n >= 1 precondition is discharged by construction.
inline MemoryState memory_hop(Tape& tape, const MemoryState& state, const GsamParams& params,
                              bool controller_self_score = true) {
  GateBank bank = gsam_gates(tape, state.X, state.c, params, controller_self_score);
  Tensor x_next = mul(tape, bank.gates, state.X);
  Tensor cell_mean = reduce(tape, x_next, Reduce::mean, 0);  // [d]
  Tensor c_next = add(tape, mul(tape, bank.gate_c, state.c), cell_mean);
  return {c_next, x_next, state.hop + 1};
}

struct GsamnRun {
  Tensor c_final;                  // controller after the last hop
  std::vector<MemoryState> trace;  // hops + 1 states, initial state first
};

inline GsamnRun run_gsamn(Tape& tape, const Tensor& X0, const Tensor& c0,
                          const GsamnConfig& config, const HopParams& params) {
  config.check();
  check_hop_params(params, config);
  if (X0.rank() != 2 || X0.dim(1) != config.d || c0.rank() != 1 || c0.dim(0) != config.d)
    throw DimensionError("memory " + shape_str(X0.shape()) + " / context " +
                         shape_str(c0.shape()) + " do not match dimension " +
                         std::to_string(config.d));

  GsamnRun run;
  run.trace.push_back({c0, X0, 0});
  for (std::size_t k = 0; k < config.hops; ++k) {
    const GsamParams& p = config.share_params_across_hops ? params[0] : params[k];
    run.trace.push_back(
        memory_hop(tape, run.trace.back(), p, config.controller_self_score));
  }
  run.c_final = run.trace.back().c;
  return run;
}

}  // namespace gsamn
