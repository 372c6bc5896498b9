#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gsamn/attention.hpp"
#include "gsamn/checkpoint.hpp"
#include "gsamn/grad_check.hpp"
#include "gsamn/metrics.hpp"
#include "gsamn/model.hpp"
#include "gsamn/network.hpp"
#include "gsamn/optimizer.hpp"
#include "gsamn/rng.hpp"

// Built-in verification battery: each check computes a max-error style figure
// that must stay under its threshold. The battery is what `selfcheck` runs.

namespace gsamn {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

namespace detail {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
  std::vector<double> vals(shape_numel(shape));
  for (double& v : vals) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(vals));
}

// Deliberately separate AP computation: comparison sort plus counting loop.
inline double selfcheck_oracle_ap(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double hits = 0.0, sum = 0.0, rank = 0.0;
  for (std::size_t i : idx) {
    rank += 1.0;
    if (labels[i] == 1) {
      hits += 1.0;
      sum += hits / rank;
    }
  }
  return sum / hits;
}

inline Model selfcheck_model(std::uint64_t seed) {
  GsamnConfig config;
  config.hops = 2;
  config.d = 3;
  Vocab vocab = Vocab::from_tokens({"blue", "color", "is", "sky", "the", "what"});
  return Model::fresh_random(config, 16, std::move(vocab), seed);
}

}  // namespace detail

inline std::vector<CheckResult> run_selfchecks(bool inject_fault = false) {
  std::vector<CheckResult> results;
  auto add = [&results](const std::string& name, double err, double threshold) {
    results.push_back({name, err, threshold, err < threshold});
  };

  {  // Elementary operator gradients through a deep composite.
    Rng rng(101);
    Tensor x = detail::random_tensor(rng, {3, 3});
    auto f = [](Tape& tape, const Tensor& t) {
      Tensor h = sigmoid(tape, matmul(tape, t, t));
      Tensor s = softmax_rows(tape, h);
      return sum_all(tape, log(tape, add_scalar(tape, s, 1.5)));
    };
    add("operator gradients", grad_check(f, x, 1e-6, 1e-5).max_rel_error, 1e-6);
  }

  {  // Full-model gradient against finite differences (inert bias excluded).
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Model m = detail::selfcheck_model(seed);
      auto loss_fn = [&m](Tape& tape) {
        Tensor p = m.score_pair(tape, {"what", "color"}, {"sky", "blue"});
        return bce_loss(tape, p, 1);
      };
      std::vector<std::pair<std::string, Tensor>> checked;
      for (const auto& param : m.named_params()) {
        if (param.name.find(".b") != std::string::npos && param.name.rfind("gate", 0) == 0)
          continue;
        checked.emplace_back(param.name, param.tensor);
      }
      GradCheckResult r = grad_check_params(loss_fn, checked, 1e-4, 1e-5, 1e-5);
      worst = std::max(worst, r.max_rel_error);
      if (!r.ok) worst = std::max(worst, 1.0);
    }
    if (inject_fault) worst += 1e-3;  // negative-control hook
    add("end-to-end gradient", worst, 1e-4);
  }

  {  // The shared gate shift must be exactly inert.
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Model m = detail::selfcheck_model(seed);
      Tape tape;
      Tensor p = m.score_pair(tape, {"what", "color"}, {"sky", "blue"});
      tape.backward(bce_loss(tape, p, 1));
      for (const auto& param : m.named_params()) {
        if (!(param.name.find(".b") != std::string::npos && param.name.rfind("gate", 0) == 0))
          continue;
        for (double g : param.tensor.grad()) worst = std::max(worst, std::fabs(g));
      }
    }
    add("gate shift inertness", worst, 1e-12);
  }

  {  // Joint softmax rows sum to one; every gate stays strictly inside (0,1).
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(8);
      Tensor X = detail::random_tensor(rng, {n, d});
      Tensor c = detail::random_tensor(rng, {d});
      GsamParams params{detail::random_tensor(rng, {d, d}), detail::random_tensor(rng, {d})};
      Tape tape;
      GateBank bank = gsam_gates(tape, X, c, params, true);
      for (const auto& breakdown : bank.breakdowns) {
        double sum = 0.0;
        for (double w : breakdown.weights.values()) sum += w;
        worst = std::max(worst, std::fabs(sum - 1.0));
      }
      for (double g : bank.gates.values())
        if (!(g > 0.0 && g < 1.0)) worst = std::max(worst, 1.0);
      for (double g : bank.gate_c.values())
        if (!(g > 0.0 && g < 1.0)) worst = std::max(worst, 1.0);
    }
    add("attention normalization", worst, 1e-9);
  }

  {  // Hops shrink every memory coordinate; zeros stay zero.
    Rng rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.below(5), d = 1 + rng.below(5);
      Tensor X = detail::random_tensor(rng, {n, d});
      if (trial % 3 == 0) X.values()[rng.below(n * d)] = 0.0;
      Tensor c = detail::random_tensor(rng, {d});
      GsamnConfig config;
      config.hops = 1;
      config.d = d;
      Rng prng(trial + 1);
      HopParams params = init_hop_params(prng, config);
      Tape tape;
      GsamnRun run = run_gsamn(tape, X, c, config, params);
      const Tensor& X1 = run.trace.back().X;
      for (std::size_t i = 0; i < X.numel(); ++i) {
        const double before = std::fabs(X.values()[i]), after = std::fabs(X1.values()[i]);
        if (before == 0.0)
          worst = std::max(worst, after);  // zero must stay zero
        else if (after >= before)
          worst = std::max(worst, 1.0);  // contraction must be strict
      }
    }
    add("memory contraction", worst, 1e-15);
  }

  {  // One-cell hand-derived chain through the probability readout.
    GsamnConfig config;
    config.hops = 1;
    config.d = 1;
    HopParams gates{GsamParams{Tensor::zeros({1, 1}), Tensor::zeros({1})}};
    ClassifierParams cls{Tensor({1, 1}, {1.0}), Tensor::zeros({1})};
    Tape tape;
    Tensor p = score_sequence(tape, Tensor({1, 1}, {1.0}), Tensor({1}, {1.0}), config, gates, cls);
    add("hand-computed oracle", std::fabs(p.value() - 0.8118562749129378), 1e-6);
  }

  {  // Warmup/decay schedule against its closed form.
    TrainConfig cfg;
    cfg.peak_lr = 5e-5;
    cfg.total_steps = 100;
    double worst = std::fabs(lr_at(0, cfg)) + std::fabs(lr_at(100, cfg)) +
                   std::fabs(lr_at(10, cfg) - 5e-5);
    for (std::size_t s = 0; s <= 100; ++s) {
      const double expect = s <= 10 ? 5e-5 * static_cast<double>(s) / 10.0
                                    : 5e-5 * static_cast<double>(100 - s) / 90.0;
      worst = std::max(worst, std::fabs(lr_at(s, cfg) - expect));
    }
    add("learning-rate schedule", worst, 1e-18);
  }

  {  // Ranking metrics against the independent implementation.
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(10);
      std::vector<double> scores;
      std::vector<int> labels;
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        double s = rng.uniform();
        if (rng.below(2) == 0) s = std::round(s * 3.0) / 3.0;
        scores.push_back(s);
        labels.push_back(rng.below(2) == 0 ? 0 : 1);
        any = any || labels.back() == 1;
      }
      if (!any) labels[rng.below(n)] = 1;
      const double mine = average_precision(ranked_labels(scores, labels));
      worst = std::max(worst, std::fabs(mine - detail::selfcheck_oracle_ap(scores, labels)));
    }
    add("metric oracle", worst, 1e-15);
  }

  {  // Serialized checkpoints survive a parse/serialize cycle byte for byte.
    Model m = detail::selfcheck_model(55);
    Checkpoint ckpt = checkpoint_from_model(m);
    ckpt.blocks["zz.opaque"] = {0.5, -0.5};
    const std::string once = serialize_checkpoint(ckpt);
    const std::string twice = serialize_checkpoint(parse_checkpoint(once));
    add("checkpoint round trip", once == twice ? 0.0 : 1.0, 0.5);
  }

  return results;
}

}  // namespace gsamn
