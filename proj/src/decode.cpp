#include "uabs/decode.hpp"

#include <algorithm>
#include <cmath>

#include "uabs/error.hpp"
#include "uabs/rng.hpp"

namespace uabs {

const char* to_string(UncertaintyKind kind) noexcept {
  switch (kind) {
    case UncertaintyKind::Total: return "total";
    case UncertaintyKind::Aleatoric: return "aleatoric";
    case UncertaintyKind::Epistemic: return "epistemic";
  }
  return "total";
}

UncertaintyKind kind_from_string(const std::string& name) {
  if (name == "total") return UncertaintyKind::Total;
  if (name == "aleatoric") return UncertaintyKind::Aleatoric;
  if (name == "epistemic") return UncertaintyKind::Epistemic;
  fail(ErrorCategory::InvalidConfig, "unknown uncertainty kind: " + name);
}

double uncertainty_component(const UncertaintyBreakdown& b, UncertaintyKind kind) noexcept {
  switch (kind) {
    case UncertaintyKind::Total: return b.total();
    case UncertaintyKind::Aleatoric: return b.aleatoric;
    case UncertaintyKind::Epistemic: return b.epistemic;
  }
  return b.total();
}

void DecodeConfig::validate() const {
  if (beam_width < 1) fail(ErrorCategory::InvalidConfig, "beam_width must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCategory::InvalidConfig, "lambda must be finite and nonnegative");
  }
  if (max_len < 1) fail(ErrorCategory::InvalidConfig, "max_len must be at least 1");
}

bool hypothesis_precedes(const Hypothesis& a, const Hypothesis& b, double lambda,
                         UncertaintyKind kind) {
  const double sa = a.objective(lambda, kind);
  const double sb = b.objective(lambda, kind);
  if (sa != sb) return sa > sb;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

std::pair<Categorical, UncertaintyBreakdown> step_scores(const EnsembleModel& e,
                                                         const Context& c) {
  const EnsembleDistribution members = e.score(c);
  return {aggregate(members), decompose(members)};
}

namespace {

Hypothesis extend(const Hypothesis& parent, TokenId token, double logp,
                  const UncertaintyBreakdown& step) {
  Hypothesis child;
  child.tokens.reserve(parent.tokens.size() + 1);
  child.tokens.assign(parent.tokens.begin(), parent.tokens.end());
  child.tokens.push_back(token);
  child.cum_logp = parent.cum_logp + logp;
  child.cum_unc.aleatoric = parent.cum_unc.aleatoric + step.aleatoric;
  child.cum_unc.epistemic = parent.cum_unc.epistemic + step.epistemic;
  child.finished = token == kEos;
  return child;
}

std::vector<Hypothesis> run_beam(const EnsembleModel& e, InputId input,
                                 const DecodeConfig& cfg) {
  cfg.validate();
  std::vector<Hypothesis> beams{Hypothesis{}};
  for (std::size_t step = 0; step < cfg.max_len; ++step) {
    bool any_unfinished = false;
    std::vector<Hypothesis> next;
    for (const Hypothesis& hyp : beams) {
      if (hyp.finished) {
        next.push_back(hyp);
        continue;
      }
      any_unfinished = true;
      const auto [agg, breakdown] = step_scores(e, Context{input, hyp.tokens});
      for (TokenId v = 0; v < agg.size(); ++v) {
        if (agg[v] == 0.0) continue;
        next.push_back(extend(hyp, v, agg.log_prob(v), breakdown));
      }
    }
    if (!any_unfinished) break;
    std::sort(next.begin(), next.end(), [&](const Hypothesis& a, const Hypothesis& b) {
      return hypothesis_precedes(a, b, cfg.lambda, cfg.kind);
    });
    if (next.size() > cfg.beam_width) next.resize(cfg.beam_width);
    beams = std::move(next);
  }
  if (cfg.strict) {
    for (const Hypothesis& hyp : beams) {
      if (!hyp.finished) {
        fail(ErrorCategory::NoFinishedHypothesis,
             "length limit reached before EOS in strict mode");
      }
    }
  }
  return beams;
}

}  // namespace

std::vector<Hypothesis> beam_search(const EnsembleModel& e, InputId input,
                                    const DecodeConfig& cfg) {
  if (cfg.lambda != 0.0) {
    fail(ErrorCategory::InvalidConfig, "beam_search requires lambda == 0");
  }
  return run_beam(e, input, cfg);
}

std::vector<Hypothesis> uabs(const EnsembleModel& e, InputId input,
                             const DecodeConfig& cfg) {
  return run_beam(e, input, cfg);
}

namespace {

struct ExhaustiveState {
  const EnsembleModel* ensemble;
  InputId input;
  double lambda;
  UncertaintyKind kind;
  std::size_t max_len;
  std::size_t cap;
  std::size_t enumerated = 0;
  bool have_best = false;
  Hypothesis best;

  void visit_terminal(const Hypothesis& hyp) {
    if (++enumerated > cap) {
      fail(ErrorCategory::SearchSpaceTooLarge,
           "more than " + std::to_string(cap) + " terminal sequences");
    }
    if (!have_best || hypothesis_precedes(hyp, best, lambda, kind)) {
      best = hyp;
      have_best = true;
    }
  }

  void expand(const Hypothesis& hyp) {
    if (hyp.finished || hyp.tokens.size() == max_len) {
      visit_terminal(hyp);
      return;
    }
    const auto [agg, breakdown] = step_scores(*ensemble, Context{input, hyp.tokens});
    for (TokenId v = 0; v < agg.size(); ++v) {
      if (agg[v] == 0.0) continue;
      expand(extend(hyp, v, agg.log_prob(v), breakdown));
    }
  }
};

}  // namespace

Hypothesis exhaustive_decode(const EnsembleModel& e, InputId input, double lambda,
                             UncertaintyKind kind, std::size_t max_len,
                             std::size_t cap) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCategory::InvalidConfig, "lambda must be finite and nonnegative");
  }
  if (max_len < 1) fail(ErrorCategory::InvalidConfig, "max_len must be at least 1");
  if (cap < 1) fail(ErrorCategory::InvalidConfig, "cap must be at least 1");
  ExhaustiveState state{&e, input, lambda, kind, max_len, cap, {}, {}, {}};
  state.expand(Hypothesis{});
  if (!state.have_best) {
    fail(ErrorCategory::NoFinishedHypothesis, "no terminal sequence found");
  }
  return state.best;
}

Hypothesis sample(const EnsembleModel& e, InputId input, std::uint64_t seed,
                  std::size_t max_len) {
  if (max_len < 1) fail(ErrorCategory::InvalidConfig, "max_len must be at least 1");
  Rng rng(seed);
  Hypothesis hyp;
  while (!hyp.finished && hyp.tokens.size() < max_len) {
    const auto [agg, breakdown] = step_scores(e, Context{input, hyp.tokens});
    const double u = rng.uniform01();
    double acc = 0.0;
    TokenId chosen = 0;
    bool have = false;
    for (TokenId v = 0; v < agg.size(); ++v) {
      if (agg[v] == 0.0) continue;
      chosen = v;
      have = true;
      acc += agg[v];
      if (u < acc) break;
    }
    if (!have) {
      fail(ErrorCategory::InvariantViolation, "distribution without support");
    }
    hyp = extend(hyp, chosen, agg.log_prob(chosen), breakdown);
  }
  return hyp;
}

std::vector<StepRecord> replay(const EnsembleModel& e, InputId input,
                               const std::vector<TokenId>& tokens) {
  std::vector<StepRecord> out;
  out.reserve(tokens.size());
  Context c{input, {}};
  for (const TokenId t : tokens) {
    const auto [agg, breakdown] = step_scores(e, c);
    out.push_back(StepRecord{t, agg.log_prob(t), breakdown});
    c.prefix.push_back(t);
  }
  return out;
}

}  // namespace uabs
