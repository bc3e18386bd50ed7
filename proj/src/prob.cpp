#include "uabs/prob.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace uabs {

namespace {

void check_entries(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) {
      fail(ErrorCategory::NonFinite,
           "non-finite entry at index " + std::to_string(i));
    }
    if (v < 0.0) {
      fail(ErrorCategory::NegativeWeight,
           "negative entry " + std::to_string(v) + " at index " + std::to_string(i));
    }
  }
}

}  // namespace

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    fail(ErrorCategory::InvariantViolation, "empty probability vector");
  }
  check_entries(probs_);
  double sum = 0.0;
  for (const double p : probs_) sum += p;
  const double gap = std::fabs(sum - 1.0);
  if (gap <= kExactSumSlack) return;
  if (gap <= kSumSlack) {
    for (double& p : probs_) p /= sum;
    return;
  }
  fail(ErrorCategory::InvariantViolation,
       "probabilities sum to " + std::to_string(sum) + ", expected 1");
}

double Categorical::prob(TokenId token) const {
  if (token >= probs_.size()) {
    fail(ErrorCategory::OutOfVocab,
         "token " + std::to_string(token) + " outside vocabulary of size " +
             std::to_string(probs_.size()));
  }
  return probs_[token];
}

Nats Categorical::log_prob(TokenId token) const {
  const double p = prob(token);
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(p);
}

Nats Categorical::entropy() const {
  double h = 0.0;
  for (const double p : probs_) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

Categorical normalize(const std::vector<double>& weights) {
  if (weights.empty()) {
    fail(ErrorCategory::InvariantViolation, "empty weight vector");
  }
  check_entries(weights);
  double sum = 0.0;
  for (const double w : weights) sum += w;
  if (sum == 0.0) {
    fail(ErrorCategory::AllZero, "cannot normalize an all-zero weight vector");
  }
  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / sum;
  return Categorical(std::move(probs));
}

Categorical mixture(const std::vector<Categorical>& components,
                    const std::vector<double>& weights) {
  if (components.empty()) {
    fail(ErrorCategory::InvariantViolation, "mixture of zero components");
  }
  if (components.size() != weights.size()) {
    fail(ErrorCategory::ShapeMismatch,
         std::to_string(components.size()) + " components vs " +
             std::to_string(weights.size()) + " weights");
  }
  check_entries(weights);
  double wsum = 0.0;
  for (const double w : weights) wsum += w;
  if (std::fabs(wsum - 1.0) > Categorical::kSumSlack) {
    fail(ErrorCategory::InvariantViolation,
         "mixture weights sum to " + std::to_string(wsum) + ", expected 1");
  }
  const std::size_t dim = components.front().size();
  for (std::size_t m = 1; m < components.size(); ++m) {
    if (components[m].size() != dim) {
      fail(ErrorCategory::ShapeMismatch,
           "component " + std::to_string(m) + " has size " +
               std::to_string(components[m].size()) + ", expected " +
               std::to_string(dim));
    }
  }
  std::vector<double> probs(dim, 0.0);
  for (std::size_t m = 0; m < components.size(); ++m) {
    const double w = weights[m];
    if (w == 0.0) continue;
    const std::vector<double>& p = components[m].probs();
    for (std::size_t i = 0; i < dim; ++i) probs[i] += w * p[i];
  }
  return Categorical(std::move(probs));
}

}  // namespace uabs
