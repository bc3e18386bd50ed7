#pragma once

#include <cstdint>
#include <vector>

#include "uabs/decode.hpp"
#include "uabs/world.hpp"

namespace uabs {

/// A decoded sequence together with the input it was conditioned on.
struct DecodedOutput {
  InputId input = 0;
  Hypothesis hyp;
};

/// One content-token occurrence in a decoded output, with the predictive
/// uncertainty of the step that emitted it and its exact hallucination flag.
struct LabeledPrediction {
  Context context;
  TokenId token = 0;
  UncertaintyBreakdown breakdown;
  bool hallucinated = false;
};

struct BinRow {
  std::size_t count = 0;
  std::size_t hallucinated = 0;
  bool defined = false;  // false for empty bins: no rate is fabricated
  double rate = 0.0;
};

/// Hallucination rate per uncertainty bin. With E ascending edges there are
/// E+1 bins: (-inf, e0], (e0, e1], ..., (eLast, inf).
struct BinTable {
  std::vector<double> edges;
  std::vector<BinRow> bins;
};

/// Default bin edges for uncertainty (nats).
inline const std::vector<double> kDefaultBinEdges{0.8, 1.6, 2.4, 3.2, 4.0};

/// Probability mass the distribution puts on the given token set.
/// Throws OutOfVocab on ids outside the distribution.
double hallucination_probability(const Categorical& d, const std::vector<TokenId>& h);

/// One LabeledPrediction per content-token occurrence in the outputs
/// (function tokens, BOS, EOS skipped), with per-step breakdowns recomputed
/// under the ensemble and exact hallucination flags from the world's
/// grounding. Throws WorldMismatch when an output refers to inputs or tokens
/// this world does not have, or the ensemble shape disagrees with the world.
std::vector<LabeledPrediction> label_outputs(const WorldSpec& w, const EnsembleModel& e,
                                             const std::vector<DecodedOutput>& outputs);

/// Bins predictions by breakdown[kind] and reports the per-bin hallucination
/// rate. Throws UnsortedEdges unless edges are strictly ascending.
BinTable bin_rates(const std::vector<LabeledPrediction>& preds,
                   const std::vector<double>& edges, UncertaintyKind kind);

/// Pearson correlation. Throws DegenerateVariance when either series is
/// constant (the coefficient is undefined, not zero), ShapeMismatch on
/// length disagreement or fewer than two points.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

/// Point-biserial form: booleans enter as {0, 1}.
double pearson(const std::vector<bool>& flags, const std::vector<double>& values);

/// Spearman rank correlation (average ranks on ties), same error contract
/// as pearson.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct RateResult {
  double rate = 0.0;
  std::size_t hallucinated = 0;
  std::size_t mentions = 0;
  bool defined = false;  // false when the outputs contain no content tokens
};

/// Hallucinated content-token occurrences over all content-token occurrences.
RateResult hallucination_rate(const std::vector<DecodedOutput>& outputs,
                              const WorldSpec& w);

struct SummaryStats {
  double avg_len = 0.0;          // mean token count excluding BOS/EOS
  std::size_t mention_count = 0; // total content-token occurrences
  double generic_rate = 0.0;     // fraction of outputs with zero content tokens
};

SummaryStats summary_stats(const std::vector<DecodedOutput>& outputs, const WorldSpec& w);

/// Mixing weight of the uniform floor in the quality proxy. The true model
/// puts exactly zero mass on hallucinated tokens, so scoring against it
/// unsmoothed collapses any output containing one to -inf; the floor turns
/// that into a large finite penalty while shifting clean-output scores by
/// less than 1e-6 nats per step.
inline constexpr double kQualitySmoothing = 1e-6;

/// Mean per-output log-likelihood under the world's true model, smoothed by
/// kQualitySmoothing. The synthetic stand-in for reference-based quality
/// scores.
double quality_proxy(const WorldSpec& w, const std::vector<DecodedOutput>& outputs);

struct SweepPoint {
  UncertaintyKind kind = UncertaintyKind::Total;
  double lambda = 0.0;
};

struct SweepOptions {
  std::size_t beam_width = 5;
  bool exhaustive = false;    // decode with the oracle instead of a beam
  std::size_t max_len = 0;    // 0: use the world's max_len
  std::size_t jobs = 1;       // grid points decoded in parallel
  std::size_t cap = 1000000;  // oracle enumeration cap
};

struct TradeoffRecord {
  UncertaintyKind kind = UncertaintyKind::Total;
  double lambda = 0.0;
  double quality = 0.0;
  double hallucination_rate = 0.0;
  double avg_len = 0.0;
  std::size_t mention_count = 0;
  double generic_rate = 0.0;
};

/// Paper-default penalty grids per kind.
std::vector<double> default_lambda_grid(UncertaintyKind kind);

struct SweepPointResult {
  TradeoffRecord record;
  std::vector<DecodedOutput> outputs;  // one top-1 decode per input
};

/// Decodes every input at every grid point (top-1) and reports the
/// trade-off metrics together with the decodes they were computed from.
/// Results come back in grid order; grid points may be decoded in parallel.
/// Throws InvalidConfig on an empty grid.
std::vector<SweepPointResult> sweep_outputs(const WorldSpec& w, const EnsembleModel& e,
                                            const std::vector<SweepPoint>& grid,
                                            const SweepOptions& options);

/// As sweep_outputs, keeping only the trade-off records.
std::vector<TradeoffRecord> sweep(const WorldSpec& w, const EnsembleModel& e,
                                  const std::vector<SweepPoint>& grid,
                                  const SweepOptions& options);

}  // namespace uabs
