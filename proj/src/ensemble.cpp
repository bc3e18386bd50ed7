#include "uabs/ensemble.hpp"

#include <string>

#include "uabs/error.hpp"

namespace uabs {

namespace {

constexpr double kJensenSlack = 1e-9;

void check_members(const EnsembleDistribution& members) {
  if (members.empty()) {
    fail(ErrorCategory::InvariantViolation, "ensemble with zero members");
  }
  const std::size_t dim = members.front().size();
  for (std::size_t m = 1; m < members.size(); ++m) {
    if (members[m].size() != dim) {
      fail(ErrorCategory::ShapeMismatch,
           "member " + std::to_string(m) + " has size " +
               std::to_string(members[m].size()) + ", expected " +
               std::to_string(dim));
    }
  }
}

}  // namespace

Categorical aggregate(const EnsembleDistribution& members) {
  check_members(members);
  if (members.size() == 1) return members.front();
  const std::vector<double> weights(members.size(), 1.0 / static_cast<double>(members.size()));
  return mixture(members, weights);
}

Nats aleatoric(const EnsembleDistribution& members) {
  check_members(members);
  double sum = 0.0;
  for (const Categorical& member : members) sum += member.entropy();
  return sum / static_cast<double>(members.size());
}

Nats epistemic(const EnsembleDistribution& members) {
  return decompose(members).epistemic;
}

UncertaintyBreakdown decompose(const EnsembleDistribution& members) {
  check_members(members);
  UncertaintyBreakdown out;
  out.aleatoric = aleatoric(members);
  const Nats total = aggregate(members).entropy();
  out.epistemic = total - out.aleatoric;
  if (out.epistemic < 0.0) {
    if (out.epistemic < -kJensenSlack) {
      fail(ErrorCategory::InvariantViolation,
           "epistemic uncertainty " + std::to_string(out.epistemic) +
               " below the rounding floor");
    }
    out.epistemic = 0.0;
  }
  return out;
}

}  // namespace uabs
