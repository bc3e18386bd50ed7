#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uabs/ensemble.hpp"
#include "uabs/world.hpp"

namespace uabs {

/// Which slice of the predictive uncertainty the decoding penalty uses.
enum class UncertaintyKind { Total, Aleatoric, Epistemic };

const char* to_string(UncertaintyKind kind) noexcept;
UncertaintyKind kind_from_string(const std::string& name);  // throws InvalidConfig

double uncertainty_component(const UncertaintyBreakdown& b, UncertaintyKind kind) noexcept;

struct DecodeConfig {
  std::size_t beam_width = 5;
  double lambda = 0.0;
  UncertaintyKind kind = UncertaintyKind::Total;
  std::size_t max_len = 16;
  bool length_normalize_quality = false;  // reporting only, never selection
  bool strict = false;                    // error instead of returning unfinished hypotheses

  void validate() const;  // throws InvalidConfig
};

/// A (partial or finished) decoded sequence. BOS is implicit; a finished
/// sequence ends with EOS. cum_logp sums per-step ln p under the aggregated
/// ensemble; cum_unc sums the per-step context decompositions over the same
/// steps, the EOS-emitting step included. Both are recomputable via replay().
struct Hypothesis {
  std::vector<TokenId> tokens;
  double cum_logp = 0.0;
  UncertaintyBreakdown cum_unc;
  bool finished = false;

  /// Selection objective: cum_logp - lambda * cum_unc[kind].
  double objective(double lambda, UncertaintyKind kind) const noexcept {
    return cum_logp - lambda * uncertainty_component(cum_unc, kind);
  }
};

/// Deterministic preference order shared by the beam decoders and the
/// exhaustive oracle: higher objective, then shorter sequence, then
/// lexicographically smaller token ids.
bool hypothesis_precedes(const Hypothesis& a, const Hypothesis& b, double lambda,
                         UncertaintyKind kind);

/// Aggregated next-token distribution and its uncertainty decomposition at a
/// context. The breakdown depends only on the context, never on which
/// candidate token is then chosen.
std::pair<Categorical, UncertaintyBreakdown> step_scores(const EnsembleModel& e,
                                                         const Context& c);

/// Plain beam search, ranked best-first by cum_logp. Requires cfg.lambda == 0
/// (throws InvalidConfig otherwise). Zero-probability extensions are
/// discarded: their score is -inf and can never recover.
std::vector<Hypothesis> beam_search(const EnsembleModel& e, InputId input,
                                    const DecodeConfig& cfg);

/// Uncertainty-aware beam search: selection and final ranking use
/// cum_logp - lambda * cum_unc[kind], the penalty accumulating per step.
/// With lambda == 0 the output is identical to beam_search, ranks and
/// tie-breaks included.
std::vector<Hypothesis> uabs(const EnsembleModel& e, InputId input,
                             const DecodeConfig& cfg);

/// Global argmax of the penalized objective over every sequence that ends at
/// EOS or max_len, by support-pruned depth-first enumeration. Ties break as
/// in the beam decoders. Throws SearchSpaceTooLarge once more than `cap`
/// terminal sequences have been enumerated.
Hypothesis exhaustive_decode(const EnsembleModel& e, InputId input, double lambda,
                             UncertaintyKind kind, std::size_t max_len,
                             std::size_t cap = 1000000);

/// Ancestral sampling from the aggregated distribution; deterministic under
/// seed.
Hypothesis sample(const EnsembleModel& e, InputId input, std::uint64_t seed,
                  std::size_t max_len);

/// One decoding step of an existing sequence, recomputed from scratch.
struct StepRecord {
  TokenId token = 0;
  double logp = 0.0;
  UncertaintyBreakdown breakdown;
};

/// Recomputes the per-step trace of a token sequence under the ensemble.
/// Summing the records reproduces the Hypothesis accumulators.
std::vector<StepRecord> replay(const EnsembleModel& e, InputId input,
                               const std::vector<TokenId>& tokens);

}  // namespace uabs
