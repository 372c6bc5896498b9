#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "gsamn/grad_check.hpp"
#include "gsamn/network.hpp"
#include "gsamn/rng.hpp"
#include "test_util.hpp"

using namespace gsamn;
using Catch::Matchers::WithinAbs;
using testutil::random_tensor;
using testutil::weighted_sum;

namespace {
GsamParams zero_params(std::size_t d) {
  return {Tensor::zeros({d, d}), Tensor::zeros({d})};
}
}  // namespace

TEST_CASE("zero memory and zero controller form a fixed point") {
  Tape tape;
  MemoryState s{Tensor::zeros({2}), Tensor::zeros({3, 2}), 0};
  MemoryState next = memory_hop(tape, s, zero_params(2));
  for (double v : next.X.values()) REQUIRE(v == 0.0);
  for (double v : next.c.values()) REQUIRE(v == 0.0);
  REQUIRE(next.hop == 1);
}

TEST_CASE("zero memory leaves only the gated controller term") {
  Tape tape;
  // n=2, d=1, c0=[3], zero weights: every score is 0, weights uniform over 3
  // positions, the controller's aggregate is 3/3 = 1, so g_c = sigmoid(1).
  MemoryState s{Tensor({1}, {3}), Tensor::zeros({2, 1}), 0};
  MemoryState next = memory_hop(tape, s, zero_params(1));
  for (double v : next.X.values()) REQUIRE(v == 0.0);
  REQUIRE_THAT(next.c.at(0), WithinAbs(3.0 * 0.7310585786300049, 1e-14));
}

TEST_CASE("one-cell hand computation carries through two hops") {
  GsamnConfig config{/*hops=*/2, /*d=*/1, true, true};
  HopParams params{zero_params(1)};
  Tape tape;
  GsamnRun run = run_gsamn(tape, Tensor({1, 1}, {1}), Tensor({1}, {1}), config, params);

  REQUIRE(run.trace.size() == 3);
  REQUIRE(run.trace[0].hop == 0);
  REQUIRE(run.trace[2].hop == 2);

  // hop 1: gate = sigmoid(1); cell 1*g; controller g*1 + cell
  const double g1 = 0.7310585786300049;
  REQUIRE_THAT(run.trace[1].X.value(), WithinAbs(g1, 1e-15));
  REQUIRE_THAT(run.trace[1].c.at(0), WithinAbs(1.4621171572600098, 1e-15));

  // hop 2 repeats the recipe on (c1, x1): aggregate (x1+c1)/2, then gate
  REQUIRE_THAT(run.trace[2].X.value(), WithinAbs(0.5480162991543312, 1e-13));
  REQUIRE_THAT(run.trace[2].c.at(0), WithinAbs(1.6440488974629937, 1e-13));
  REQUIRE_THAT(run.c_final.at(0), WithinAbs(1.6440488974629937, 1e-13));
}

TEST_CASE("a single-hop run is exactly one memory hop") {
  Rng rng(17);
  const std::size_t n = 3, d = 2;
  Tensor X = random_tensor(rng, {n, d});
  Tensor c = random_tensor(rng, {d});
  GsamParams p = GsamParams::init(rng, d);

  Tape t1;
  MemoryState direct = memory_hop(t1, {c, X, 0}, p);
  Tape t2;
  GsamnConfig config{1, d, true, true};
  GsamnRun run = run_gsamn(t2, X, c, config, {p});
  REQUIRE(run.c_final.values() == direct.c.values());
  REQUIRE(run.trace.back().X.values() == direct.X.values());
}

TEST_CASE("memory cells contract toward zero across hops") {
  Rng rng(23);
  const std::size_t n = 4, d = 3;
  Tensor X = random_tensor(rng, {n, d});
  Tensor c = random_tensor(rng, {d});
  GsamnConfig config{3, d, true, true};
  HopParams params{GsamParams::init(rng, d)};
  Tape tape;
  GsamnRun run = run_gsamn(tape, X, c, config, params);
  for (std::size_t k = 1; k < run.trace.size(); ++k) {
    REQUIRE(run.trace[k].X.shape() == X.shape());
    REQUIRE(run.trace[k].c.shape() == c.shape());
    for (std::size_t i = 0; i < n * d; ++i) {
      const double prev = run.trace[k - 1].X.values()[i];
      const double cur = run.trace[k].X.values()[i];
      if (prev == 0.0) {
        REQUIRE(cur == 0.0);
      } else {
        REQUIRE(std::fabs(cur) < std::fabs(prev));
      }
    }
  }
}

TEST_CASE("controller output ignores memory-row order") {
  Rng rng(29);
  const std::size_t n = 4, d = 3;
  Tensor X = random_tensor(rng, {n, d});
  Tensor c = random_tensor(rng, {d});
  GsamnConfig config{2, d, true, true};
  HopParams params{GsamParams::init(rng, d)};

  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> shuffled(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) shuffled[i * d + k] = X.at(perm[i], k);

  Tape t1, t2;
  GsamnRun base = run_gsamn(t1, X, c, config, params);
  GsamnRun moved = run_gsamn(t2, Tensor({n, d}, std::move(shuffled)), c, config, params);
  for (std::size_t k = 0; k < d; ++k)
    REQUIRE_THAT(moved.c_final.at(k), WithinAbs(base.c_final.at(k), 1e-12));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      REQUIRE_THAT(moved.trace.back().X.at(i, k),
                   WithinAbs(base.trace.back().X.at(perm[i], k), 1e-12));
}

TEST_CASE("parameter count is hop-independent only when sharing") {
  Rng rng(41);
  GsamnConfig shared{4, 3, true, true};
  GsamnConfig separate{4, 3, false, true};
  HopParams ps = init_hop_params(rng, shared);
  HopParams pu = init_hop_params(rng, separate);
  REQUIRE(ps.size() == 1);
  REQUIRE(pu.size() == 4);
  REQUIRE(num_parameters(ps) == 3 * 3 + 3);
  REQUIRE(num_parameters(pu) == 4 * (3 * 3 + 3));

  REQUIRE_THROWS_AS(check_hop_params(ps, separate), ConfigError);
  REQUIRE_THROWS_AS(check_hop_params(pu, shared), ConfigError);
  REQUIRE_THROWS_AS((GsamnConfig{0, 3, true, true}).check(), ConfigError);
}

TEST_CASE("per-hop parameters are actually used per hop") {
  Rng rng(43);
  const std::size_t n = 2, d = 2;
  Tensor X = random_tensor(rng, {n, d});
  Tensor c = random_tensor(rng, {d});
  GsamnConfig config{2, d, false, true};
  HopParams distinct{GsamParams::init(rng, d), GsamParams::init(rng, d)};
  HopParams repeated{distinct[0], distinct[0]};

  Tape t1, t2;
  GsamnRun a = run_gsamn(t1, X, c, config, distinct);
  GsamnRun b = run_gsamn(t2, X, c, config, repeated);
  REQUIRE(a.c_final.values() != b.c_final.values());
}

TEST_CASE("full network gradients match finite differences") {
  Rng rng(55);
  const std::size_t n = 4, d = 4;
  GsamnConfig config{3, d, true, true};
  Tensor X = random_tensor(rng, {n, d});
  Tensor c = random_tensor(rng, {d});
  GsamParams p = GsamParams::init(rng, d);
  Tensor w = random_tensor(rng, {d});

  auto readout = [&](Tape& t, const Tensor& x0, const Tensor& c0, const GsamParams& q) {
    GsamnRun run = run_gsamn(t, x0, c0, config, {q});
    return weighted_sum(t, run.c_final, w);
  };
  auto wrt_x = [&](Tape& t, const Tensor& v) { return readout(t, v, c, p); };
  auto wrt_c = [&](Tape& t, const Tensor& v) { return readout(t, X, v, p); };
  auto wrt_w = [&](Tape& t, const Tensor& v) { return readout(t, X, c, GsamParams{v, p.b}); };
  REQUIRE(grad_check(wrt_x, X, 1e-4).ok);
  REQUIRE(grad_check(wrt_c, c, 1e-4).ok);
  REQUIRE(grad_check(wrt_w, p.W, 1e-4).ok);

  // The gate bias has mathematically zero gradient (row-softmax cancels it);
  // backward must reproduce that zero rather than something spurious.
  Tensor b = Tensor::zeros({d});
  b.set_requires_grad(true);
  Tape t;
  GsamnRun run = run_gsamn(t, X, c, config, {GsamParams{p.W, b}});
  t.backward(weighted_sum(t, run.c_final, w));
  for (double g : b.grad()) REQUIRE_THAT(g, WithinAbs(0.0, 1e-12));
}
