#pragma once

#include <vector>

#include "uabs/prob.hpp"

namespace uabs {

/// One next-token distribution per ensemble member, all over the same
/// vocabulary. Members are equally weighted everywhere below.
using EnsembleDistribution = std::vector<Categorical>;

/// Split of predictive entropy into data noise and model disagreement.
///
/// total() is defined as the sum of the stored parts rather than stored
/// separately, so total == aleatoric + epistemic holds to the last bit by
/// construction instead of up to rounding.
struct UncertaintyBreakdown {
  Nats aleatoric = 0.0;
  Nats epistemic = 0.0;

  Nats total() const noexcept { return aleatoric + epistemic; }
};

/// Equal-weight mixture of the member distributions. With one member this is
/// a bitwise copy of it. Throws ShapeMismatch on size disagreement,
/// InvariantViolation when members is empty.
Categorical aggregate(const EnsembleDistribution& members);

/// Mean of member entropies: the uncertainty that remains when every member
/// agrees (data noise).
Nats aleatoric(const EnsembleDistribution& members);

/// Aggregate entropy minus aleatoric (mutual information between prediction
/// and member identity): the disagreement share. Nonnegative by Jensen;
/// rounding residue down to -1e-9 is clamped to 0, anything lower throws
/// InvariantViolation.
Nats epistemic(const EnsembleDistribution& members);

/// Full decomposition in one pass over the members.
UncertaintyBreakdown decompose(const EnsembleDistribution& members);

}  // namespace uabs
