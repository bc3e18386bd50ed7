#pragma once

#include <cstdint>
#include <vector>

#include "uabs/error.hpp"

namespace uabs {

/// Token identifier: index into a vocabulary, dense from 0.
using TokenId = std::uint32_t;

/// Entropy and log-probability values are expressed in nats throughout.
using Nats = double;

/// Probability vector over a fixed vocabulary. Invariants: every entry is a
/// finite value in [0, 1] and the entries sum to 1 within kSumSlack.
///
/// Construction preserves exact input bits whenever the sum is already within
/// kExactSumSlack of 1; only sums in the outer renormalization band are
/// rescaled. That distinction matters downstream: single-member aggregation
/// and zero-noise perturbation are required to be bitwise identities, which a
/// blanket renormalization would silently break.
class Categorical {
 public:
  static constexpr double kExactSumSlack = 1e-10;
  static constexpr double kSumSlack = 1e-9;

  /// Validates and adopts `probs`. Throws NegativeWeight, NonFinite, or
  /// InvariantViolation (empty vector or sum outside the slack band).
  explicit Categorical(std::vector<double> probs);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](TokenId token) const { return probs_[token]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  /// p(token); throws OutOfVocab when token >= size().
  double prob(TokenId token) const;

  /// ln p(token); -inf when p(token) == 0. Throws OutOfVocab as prob() does.
  Nats log_prob(TokenId token) const;

  /// Shannon entropy in nats, with 0 ln 0 = 0. Never negative: tiny negative
  /// rounding residue is clamped to +0.
  Nats entropy() const;

 private:
  std::vector<double> probs_;
};

/// Scales a nonnegative weight vector to sum to one.
/// Throws AllZero when every weight is zero, NegativeWeight or NonFinite on
/// bad entries, InvariantViolation when empty.
Categorical normalize(const std::vector<double>& weights);

/// Convex combination sum_i w_i * components_i. Weights must be nonnegative,
/// finite, and sum to 1 within Categorical::kSumSlack; all components must
/// share one size. Throws ShapeMismatch on size disagreement (components vs
/// weights count, or component vs component).
Categorical mixture(const std::vector<Categorical>& components,
                    const std::vector<double>& weights);

}  // namespace uabs
