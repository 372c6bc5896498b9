// Minimal tour of the tape: build a composite expression, run one backward
// pass, and compare every analytic gradient with central differences.

#include <cstdio>

#include "gsamn/grad_check.hpp"
#include "gsamn/ops.hpp"
#include "gsamn/rng.hpp"
#include "gsamn/tape.hpp"
#include "gsamn/tensor.hpp"

using namespace gsamn;

int main() {
  Rng rng(7);
  std::vector<double> vals(9);
  for (double& v : vals) v = rng.uniform(-1.5, 1.5);
  Tensor x({3, 3}, std::move(vals), /*requires_grad=*/true);

  // loss = sum(log(softmax_rows(sigmoid(x @ x)) + 1.5))
  auto loss_fn = [](Tape& tape, const Tensor& t) {
    Tensor h = sigmoid(tape, matmul(tape, t, t));
    return sum_all(tape, log(tape, add_scalar(tape, softmax_rows(tape, h), 1.5)));
  };

  Tape tape;
  Tensor loss = loss_fn(tape, x);
  tape.backward(loss);

  std::printf("loss = %.10f\n\n", loss.value());
  std::printf("%5s %16s %16s\n", "coord", "analytic", "finite diff");
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = x.values()[i];
    double plus, minus;
    {
      x.values()[i] = orig + h;
      Tape t2;
      plus = loss_fn(t2, x).value();
    }
    {
      x.values()[i] = orig - h;
      Tape t2;
      minus = loss_fn(t2, x).value();
    }
    x.values()[i] = orig;
    std::printf("%5zu %16.10f %16.10f\n", i, x.grad()[i], (plus - minus) / (2.0 * h));
  }

  GradCheckResult r = grad_check(loss_fn, x, 1e-6, 1e-5);
  std::printf("\nautomated check: max relative error %.3e (%s)\n", r.max_rel_error,
              r.ok ? "ok" : r.detail.c_str());
  return r.ok ? 0 : 1;
}
