#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "advrank/losses.hpp"

#include <cmath>

using namespace advrank;

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

TEST_CASE("pointwise cross entropy values") {
  CHECK(pointwise_ce(0.0, 1).value == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(pointwise_ce(0.0, 0).value == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(pointwise_ce(3.0, 1).value == doctest::Approx(0.048587351573742059).epsilon(1e-12));

  // label/sign symmetry holds exactly (identical softplus expression)
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double s = rng.uniform(-40.0, 40.0);
    CHECK(pointwise_ce(s, 1).value == pointwise_ce(-s, 0).value);
  }
}

TEST_CASE("pointwise derivative matches finite differences") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double s = rng.uniform(-8.0, 8.0);
    const int y = rng.uniform_index(2) ? 1 : 0;
    const double h = 1e-6;
    const double fd = (pointwise_ce(s + h, y).value - pointwise_ce(s - h, y).value) / (2 * h);
    const double an = pointwise_ce(s, y).d_score;
    CHECK(std::abs(an - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("pairwise loss values") {
  CHECK(pairwise_loss(1.3, 1.3).value == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(pairwise_loss(1.0, 0.0).value == doctest::Approx(0.31326168751822286).epsilon(1e-12));

  const LossValue saturated = pairwise_loss(1e4, 0.0);
  CHECK(saturated.value < 1e-300);
  CHECK(std::isfinite(saturated.value));
  CHECK(saturated.value >= 0.0);
}

TEST_CASE("pairwise loss is translation invariant") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double fp = rng.uniform(-5.0, 5.0);
    const double fn = rng.uniform(-5.0, 5.0);
    const double c = rng.uniform(-100.0, 100.0);
    CHECK(std::abs(pairwise_loss(fp + c, fn + c).value - pairwise_loss(fp, fn).value) < 1e-9);
  }
}

TEST_CASE("pairwise derivative matches finite differences") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double fp = rng.uniform(-6.0, 6.0);
    const double fn = rng.uniform(-6.0, 6.0);
    const double h = 1e-6;
    const double fd = (pairwise_loss(fp + h, fn).value - pairwise_loss(fp - h, fn).value) / (2 * h);
    CHECK(std::abs(pairwise_loss(fp, fn).d_score - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("bernoulli KL") {
  CHECK(bernoulli_kl(0.3, 0.3) == 0.0);
  CHECK(bernoulli_kl(0.7310586, 0.5) == doctest::Approx(0.11094409304172364).epsilon(1e-9));

  // non-negative over random pairs including near-boundary values
  Rng rng(11);
  for (int i = 0; i < 100000; ++i) {
    const double p = rng.uniform();
    const double q = rng.uniform();
    CHECK(bernoulli_kl(p, q) >= 0.0);
  }

  // zero exactly iff the clamped probabilities are within threshold
  CHECK(bernoulli_kl(0.4, 0.4 + 5e-13) == 0.0);
  CHECK(bernoulli_kl(0.4, 0.4 + 5e-12) > 0.0);
  // clamping keeps extreme inputs finite
  CHECK(std::isfinite(bernoulli_kl(1e-300, 1.0)));
}

TEST_CASE("bernoulli KL derivative is consistent with the value") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(0.02, 0.98);
    const double q = rng.uniform(0.02, 0.98);
    const double h = 1e-7;
    const double fd = (bernoulli_kl(p, q + h) - bernoulli_kl(p, q - h)) / (2 * h);
    const double an = bernoulli_kl_dp_prime(p, q);
    CHECK(std::abs(an - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
  // derivative vanishes where the value is snapped to zero
  CHECK(bernoulli_kl_dp_prime(0.5, 0.5) == 0.0);
}
