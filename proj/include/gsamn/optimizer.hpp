#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gsamn/errors.hpp"
#include "gsamn/model.hpp"

namespace gsamn {

struct TrainConfig {
  double peak_lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;  // decoupled, skipped for biases and frozen rows
  double warmup_fraction = 0.10;
  std::size_t total_steps = 1;  // 0 is allowed as an explicit no-op run
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;

  void check() const {
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
      throw ConfigError("warmup_fraction must be in (0,1)");
    if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("Adam betas must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  }
};

// Warmup linearly from 0 to peak over the first round(warmup_fraction*total)
// steps, then linearly back to 0 at total_steps. Both endpoints are exactly 0.
inline double lr_at(std::size_t step, const TrainConfig& cfg) {
  cfg.check();
  if (cfg.total_steps < 1) throw ContractError("schedule needs total_steps >= 1");
  if (step > cfg.total_steps)
    throw ContractError("schedule step " + std::to_string(step) + " past total " +
                        std::to_string(cfg.total_steps));
  const auto warmup_end = static_cast<std::size_t>(
      std::llround(cfg.warmup_fraction * static_cast<double>(cfg.total_steps)));
  if (step <= warmup_end) {
    if (warmup_end == 0) return 0.0;
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup_end);
  }
  return cfg.peak_lr * static_cast<double>(cfg.total_steps - step) /
         static_cast<double>(cfg.total_steps - warmup_end);
}

// Bias-corrected Adam with decoupled weight decay. Slot state is keyed by
// parameter name and created lazily; updates honor each parameter's
// trainable-row restriction so frozen embedding rows never move.
class Adam {
 public:
  explicit Adam(const TrainConfig& cfg) : cfg_(cfg) { cfg_.check(); }

  static constexpr double kEpsilon = 1e-8;

  void step(const std::vector<NamedParam>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& p : params) {
      if (!p.tensor.has_grad())
        throw ContractError("no gradient present for parameter " + p.name);
      const auto& g = p.tensor.grad();
      for (double gi : g) {
        if (!std::isfinite(gi)) throw NumericError("non-finite gradient in parameter " + p.name);
      }
      auto& mm = m_[p.name];
      auto& vv = v_[p.name];
      if (mm.empty()) {
        mm.assign(g.size(), 0.0);
        vv.assign(g.size(), 0.0);
      } else if (mm.size() != g.size()) {
        throw ContractError("parameter " + p.name + " changed size mid-run");
      }
      auto& theta = p.tensor.data().values;
      auto update = [&](std::size_t i) {
        mm[i] = cfg_.beta1 * mm[i] + (1.0 - cfg_.beta1) * g[i];
        vv[i] = cfg_.beta2 * vv[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = mm[i] / bc1;
        const double vhat = vv[i] / bc2;
        const double old = theta[i];
        theta[i] = old - lr * mhat / (std::sqrt(vhat) + kEpsilon) -
                   (p.decay ? lr * cfg_.weight_decay * old : 0.0);
      };
      if (p.trainable_rows.empty()) {
        for (std::size_t i = 0; i < theta.size(); ++i) update(i);
      } else {
        const std::size_t cols = p.tensor.dim(1);
        for (std::size_t r : p.trainable_rows)
          for (std::size_t jcol = 0; jcol < cols; ++jcol) update(r * cols + jcol);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }
  const std::map<std::string, std::vector<double>>& first_moments() const { return m_; }
  const std::map<std::string, std::vector<double>>& second_moments() const { return v_; }

 private:
  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace gsamn
