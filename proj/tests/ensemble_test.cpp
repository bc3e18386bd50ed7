#include "uabs/ensemble.hpp"

#include <doctest.h>

#include <cmath>

#include "uabs/rng.hpp"
#include "test_util.hpp"

using namespace uabs;
using uabs::testing::category_of;

namespace {

EnsembleDistribution random_members(Rng& rng, std::size_t m, std::size_t n) {
  EnsembleDistribution members;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> w(n);
    double sum = 0.0;
    for (double& x : w) {
      x = rng.gamma(0.8) + 1e-9;
      sum += x;
    }
    (void)sum;
    members.push_back(normalize(w));
  }
  return members;
}

}  // namespace

TEST_CASE("single member aggregation is a bitwise identity") {
  const Categorical only({0.3, 0.45, 0.25});
  const Categorical agg = aggregate({only});
  CHECK(agg.probs() == only.probs());
  const UncertaintyBreakdown b = decompose({only});
  CHECK(b.epistemic == 0.0);
  CHECK(b.aleatoric == only.entropy());
  CHECK(b.total() == only.entropy());
}

TEST_CASE("disagreeing one-hot members carry purely epistemic uncertainty") {
  const EnsembleDistribution members{Categorical({1.0, 0.0}), Categorical({0.0, 1.0})};
  const Categorical agg = aggregate(members);
  CHECK(agg[0] == 0.5);
  CHECK(agg[1] == 0.5);
  const UncertaintyBreakdown b = decompose(members);
  CHECK(b.aleatoric == 0.0);
  CHECK(b.epistemic == doctest::Approx(0.6931471805599453).epsilon(1e-14));
  CHECK(b.total() == b.epistemic);
}

TEST_CASE("worked decomposition of a mixed pair") {
  // Members [1, 0] and [0.5, 0.5]: aggregate [0.75, 0.25].
  const EnsembleDistribution members{Categorical({1.0, 0.0}), Categorical({0.5, 0.5})};
  const UncertaintyBreakdown b = decompose(members);
  CHECK(b.aleatoric == doctest::Approx(0.34657359027997264).epsilon(1e-14));
  CHECK(b.total() == doctest::Approx(0.5623351446188083).epsilon(1e-14));
  CHECK(b.epistemic == doctest::Approx(0.21576155433883565).epsilon(1e-12));
}

TEST_CASE("identical members have zero disagreement") {
  const Categorical p({0.25, 0.25, 0.25, 0.25});
  const EnsembleDistribution members{p, p, p, p, p};
  const UncertaintyBreakdown b = decompose(members);
  CHECK(std::fabs(b.epistemic) <= 1e-12);
  CHECK(b.aleatoric == doctest::Approx(p.entropy()).epsilon(1e-14));
}

TEST_CASE("decomposition invariants hold on random ensembles") {
  Rng rng(0xdecaf);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + rng.uniform_below(8);
    const std::size_t n = 2 + rng.uniform_below(31);
    const EnsembleDistribution members = random_members(rng, m, n);
    const UncertaintyBreakdown b = decompose(members);
    // The accessor *is* the sum, so the identity is exact by construction.
    CHECK(b.total() == b.aleatoric + b.epistemic);
    CHECK(b.epistemic >= 0.0);
    CHECK(b.aleatoric >= 0.0);
    // Jensen: the mixture entropy dominates the mean member entropy.
    CHECK(aggregate(members).entropy() >= aleatoric(members) - 1e-9);
    // The accessor agrees with the mixture entropy up to accumulation error.
    CHECK(b.total() == doctest::Approx(aggregate(members).entropy()).epsilon(1e-12));
  }
}

TEST_CASE("ensembles reject shape disagreements and emptiness") {
  CHECK(category_of([] { decompose({}); }) == ErrorCategory::InvariantViolation);
  CHECK(category_of([] {
          decompose({Categorical({0.5, 0.5}), Categorical({0.5, 0.25, 0.25})});
        }) == ErrorCategory::ShapeMismatch);
  CHECK(category_of([] { aggregate({}); }) == ErrorCategory::InvariantViolation);
}
