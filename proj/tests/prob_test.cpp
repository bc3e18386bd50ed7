#include "uabs/prob.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

#include "uabs/rng.hpp"
#include "test_util.hpp"

using namespace uabs;
using uabs::testing::category_of;

TEST_CASE("categorical accepts exact distributions unchanged") {
  const std::vector<double> probs{0.5, 0.25, 0.25};
  const Categorical c(probs);
  // Bit preservation matters: single-member aggregation must be an identity.
  CHECK(c.probs() == probs);
  CHECK(c.size() == 3);
  CHECK(c[1] == 0.25);
}

TEST_CASE("categorical renormalizes only in the outer slack band") {
  const Categorical drifted({0.5, 0.5 + 5e-10});
  CHECK(std::fabs(drifted[0] + drifted[1] - 1.0) < 1e-15);
  CHECK(drifted[1] > drifted[0]);

  // Within the exact band the entries are adopted verbatim.
  const double nearly_half = 0.5 + 2e-11;
  const Categorical kept({0.5, nearly_half});
  CHECK(kept[1] == nearly_half);
}

TEST_CASE("categorical rejects broken inputs") {
  CHECK(category_of([] { Categorical({0.45, 0.45}); }) ==
        ErrorCategory::InvariantViolation);
  CHECK(category_of([] { Categorical({-0.1, 1.1}); }) == ErrorCategory::NegativeWeight);
  CHECK(category_of([] { Categorical({std::nan(""), 1.0}); }) ==
        ErrorCategory::NonFinite);
  CHECK(category_of([] {
          Categorical({std::numeric_limits<double>::infinity(), 0.0});
        }) == ErrorCategory::NonFinite);
  CHECK(category_of([] { Categorical({}); }) == ErrorCategory::InvariantViolation);
}

TEST_CASE("normalize scales weights and rejects zero mass") {
  const Categorical c = normalize({2.0, 1.0, 1.0});
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 0.25);
  CHECK(c[2] == 0.25);

  CHECK(category_of([] { normalize({0.0, 0.0}); }) == ErrorCategory::AllZero);
  CHECK(category_of([] { normalize({1.0, -2.0}); }) == ErrorCategory::NegativeWeight);
  CHECK(category_of([] { normalize({}); }) == ErrorCategory::InvariantViolation);
}

TEST_CASE("entropy of reference distributions") {
  CHECK(Categorical({1.0, 0.0, 0.0}).entropy() == 0.0);
  CHECK(Categorical({0.25, 0.25, 0.25, 0.25}).entropy() ==
        doctest::Approx(1.3862943611198906).epsilon(1e-14));
  CHECK(Categorical({0.5, 0.25, 0.25}).entropy() ==
        doctest::Approx(1.0397207708399179).epsilon(1e-14));
}

TEST_CASE("log_prob handles zeros and range errors") {
  const Categorical c({0.5, 0.5, 0.0});
  CHECK(c.log_prob(0) == doctest::Approx(-0.6931471805599453).epsilon(1e-14));
  CHECK(std::isinf(c.log_prob(2)));
  CHECK(c.log_prob(2) < 0);
  CHECK(category_of([&] { c.log_prob(3); }) == ErrorCategory::OutOfVocab);
  CHECK(category_of([&] { c.prob(17); }) == ErrorCategory::OutOfVocab);
}

TEST_CASE("mixture blends components by weight") {
  const std::vector<Categorical> parts{Categorical({1.0, 0.0}), Categorical({0.0, 1.0})};
  const Categorical even = mixture(parts, {0.5, 0.5});
  CHECK(even[0] == 0.5);
  CHECK(even[1] == 0.5);

  const Categorical lopsided = mixture(parts, {0.75, 0.25});
  CHECK(lopsided[0] == 0.75);

  CHECK(category_of([&] { mixture(parts, {0.5}); }) == ErrorCategory::ShapeMismatch);
  CHECK(category_of([&] { mixture(parts, {0.7, 0.7}); }) ==
        ErrorCategory::InvariantViolation);
  CHECK(category_of([&] {
          mixture({Categorical({1.0, 0.0}), Categorical({0.5, 0.25, 0.25})},
                  {0.5, 0.5});
        }) == ErrorCategory::ShapeMismatch);
  CHECK(category_of([&] { mixture({}, {}); }) == ErrorCategory::InvariantViolation);
}

TEST_CASE("entropy stays within [0, ln n] on random distributions") {
  Rng rng(0x5eed);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(63);
    std::vector<double> w(n);
    for (double& x : w) x = rng.gamma(0.7);
    bool all_zero = true;
    for (const double x : w) all_zero &= (x == 0.0);
    if (all_zero) continue;
    const Categorical c = normalize(w);
    const double h = c.entropy();
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(n)) + 1e-12);
  }
}
