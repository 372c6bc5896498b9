#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gsamn/tape.hpp"
#include "gsamn/tensor.hpp"

// Finite-difference verification of backward rules. Central differences with
// step h, compared coordinatewise against the analytic gradient under
//   rel = |a - n| / max(floor, |a|, |n|).
// The floor defaults to 1e-8, which suits elementary-operation checks whose
// gradients are O(1). Whole-model checks should raise it to ~1e-5: some
// parameter coordinates have true gradients near zero, where the difference
// quotient carries ~1e-11 of fp64 rounding noise; a real backward-rule bug
// shifts gradients at their own scale and still fails by orders of magnitude.

namespace gsamn {

struct GradCheckResult {
  bool ok = true;
  double max_rel_error = 0.0;
  std::string detail;  // empty when ok; names the worst coordinate otherwise
};

namespace detail {

inline bool check_coord(double analytic, double numeric, double tolerance, double floor,
                        std::size_t coord, const std::string& label, GradCheckResult& result) {
  if (std::isnan(analytic) || std::isnan(numeric)) {
    result.ok = false;
    result.detail = label + "[" + std::to_string(coord) + "]: analytic=" +
                    std::to_string(analytic) + " numeric=" + std::to_string(numeric) + " (NaN)";
    return false;
  }
  const double denom = std::max({floor, std::fabs(analytic), std::fabs(numeric)});
  const double rel = std::fabs(analytic - numeric) / denom;
  if (rel > result.max_rel_error) result.max_rel_error = rel;
  if (rel > tolerance) {
    result.ok = false;
    result.detail = label + "[" + std::to_string(coord) + "]: analytic=" +
                    std::to_string(analytic) + " numeric=" + std::to_string(numeric) +
                    " rel=" + std::to_string(rel);
    return false;
  }
  return true;
}

}  // namespace detail

// f maps (tape, x) to a scalar tensor. The analytic gradient is taken from one
// backward pass; the numeric one perturbs each coordinate of a detached copy.
inline GradCheckResult grad_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& point,
    double tolerance = 1e-6, double step = 1e-5, double floor = 1e-8) {
  Tensor x = point.clone();
  x.set_requires_grad(true);

  GradCheckResult result;
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor loss = f(tape, x);
    tape.backward(loss);
    analytic = x.grad();
  }

  for (std::size_t i = 0; i < x.numel(); ++i) {
    Tensor probe = point.clone();
    const double orig = probe.values()[i];
    double plus, minus;
    {
      probe.values()[i] = orig + step;
      Tape tape;
      plus = f(tape, probe).value();
    }
    {
      probe.values()[i] = orig - step;
      Tape tape;
      minus = f(tape, probe).value();
    }
    const double numeric = (plus - minus) / (2.0 * step);
    if (!detail::check_coord(analytic[i], numeric, tolerance, floor, i, "x", result)) return result;
  }
  return result;
}

// Same idea for a loss over a set of live parameter tensors: one backward pass
// collects every analytic gradient, then each coordinate of each parameter is
// perturbed in place (and restored) for the numeric estimate.
inline GradCheckResult grad_check_params(
    const std::function<Tensor(Tape&)>& loss_fn,
    const std::vector<std::pair<std::string, Tensor>>& params, double tolerance = 1e-6,
    double step = 1e-5, double floor = 1e-8) {
  GradCheckResult result;
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
    for (const auto& [name, p] : params) analytic.push_back(p.grad());
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    Tensor live = p;  // shared handle: perturbations hit the real parameter
    for (std::size_t i = 0; i < live.numel(); ++i) {
      const double orig = live.values()[i];
      double plus, minus;
      {
        live.values()[i] = orig + step;
        Tape tape;
        plus = loss_fn(tape).value();
      }
      {
        live.values()[i] = orig - step;
        Tape tape;
        minus = loss_fn(tape).value();
      }
      live.values()[i] = orig;
      const double numeric = (plus - minus) / (2.0 * step);
      if (!detail::check_coord(analytic[pi][i], numeric, tolerance, floor, i, name, result)) return result;
    }
  }
  return result;
}

}  // namespace gsamn
