#include "uabs/decode.hpp"

#include <doctest.h>

#include <cmath>

#include "uabs/rng.hpp"
#include "test_util.hpp"

using namespace uabs;
using uabs::testing::category_of;

namespace {

WorldConfig tiny_config(std::size_t vocab = 6, std::size_t max_len = 4) {
  WorldConfig cfg;
  cfg.vocab_size = vocab;
  cfg.function_tokens = 1;
  cfg.num_inputs = 2;
  cfg.order = 1;
  cfg.grounded_fraction = 0.7;
  cfg.max_len = max_len;
  cfg.leak = 0.25;
  cfg.min_support = 1;
  cfg.max_support = 4;
  return cfg;
}

/// A 3-token chain world: the true model walks BOS -> 2 -> 3 -> EOS with
/// probability one.
EnsembleModel chain_ensemble(std::size_t members) {
  Categorical fallback({0.0, 1.0, 0.0, 0.0});
  TabularModel m(1, 4, 1, fallback);
  m.set_entry(0, {kBos}, Categorical({0.0, 0.0, 1.0, 0.0}));
  m.set_entry(0, {2}, Categorical({0.0, 0.0, 0.0, 1.0}));
  m.set_entry(0, {3}, Categorical({0.0, 1.0, 0.0, 0.0}));
  EnsembleModel e;
  for (std::size_t i = 0; i < members; ++i) e.members.push_back(m);
  return e;
}

bool same_ranking(const std::vector<Hypothesis>& a, const std::vector<Hypothesis>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tokens != b[i].tokens) return false;
    if (a[i].cum_logp != b[i].cum_logp) return false;
    if (a[i].cum_unc.aleatoric != b[i].cum_unc.aleatoric) return false;
    if (a[i].cum_unc.epistemic != b[i].cum_unc.epistemic) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("step scores compose aggregation and decomposition") {
  const WorldSpec w = generate_world(tiny_config(), 31);
  const EnsembleModel e = perturb_members(w, 5, 0.4, 8);
  const Context c{0, {}};
  const auto [agg, breakdown] = step_scores(e, c);
  const EnsembleDistribution members = e.score(c);
  CHECK(agg.probs() == aggregate(members).probs());
  const UncertaintyBreakdown direct = decompose(members);
  CHECK(breakdown.aleatoric == direct.aleatoric);
  CHECK(breakdown.epistemic == direct.epistemic);
}

TEST_CASE("identical members make the epistemic penalty vanish") {
  const EnsembleModel e = chain_ensemble(4);
  const auto [agg, breakdown] = step_scores(e, Context{0, {}});
  CHECK(agg[2] == 1.0);
  CHECK(breakdown.epistemic == 0.0);
  CHECK(breakdown.aleatoric == 0.0);
}

TEST_CASE("deterministic chain decodes to the chain with zero cost") {
  const EnsembleModel e = chain_ensemble(3);
  DecodeConfig cfg;
  cfg.beam_width = 2;
  cfg.max_len = 5;
  const std::vector<Hypothesis> out = beam_search(e, 0, cfg);
  REQUIRE(!out.empty());
  CHECK(out.front().tokens == std::vector<TokenId>{2, 3, kEos});
  CHECK(out.front().cum_logp == 0.0);
  CHECK(out.front().finished);

  // Any seed samples the same chain.
  for (const std::uint64_t seed : {1ULL, 99ULL, 31337ULL}) {
    const Hypothesis s = sample(e, 0, seed, 5);
    CHECK(s.tokens == std::vector<TokenId>{2, 3, kEos});
  }

  const Hypothesis oracle = exhaustive_decode(e, 0, 0.0, UncertaintyKind::Total, 5);
  CHECK(oracle.tokens == std::vector<TokenId>{2, 3, kEos});
}

TEST_CASE("width one is greedy") {
  const WorldSpec w = generate_world(tiny_config(), 17);
  const EnsembleModel e = perturb_members(w, 3, 0.3, 4);
  DecodeConfig cfg;
  cfg.beam_width = 1;
  cfg.max_len = w.max_len;
  const std::vector<Hypothesis> out = beam_search(e, 0, cfg);
  REQUIRE(out.size() == 1);

  // Replay greedily: each step must pick the argmax token (ties by id).
  Context c{0, {}};
  for (const TokenId t : out.front().tokens) {
    const auto [agg, breakdown] = step_scores(e, c);
    (void)breakdown;
    TokenId best = 0;
    double best_p = -1.0;
    for (TokenId v = 0; v < agg.size(); ++v) {
      if (agg[v] > best_p) {
        best_p = agg[v];
        best = v;
      }
    }
    CHECK(t == best);
    c.prefix.push_back(t);
  }
}

TEST_CASE("lambda zero reduces the penalized search to plain beam search") {
  Rng seeds(0xabc);
  for (int trial = 0; trial < 20; ++trial) {
    const WorldSpec w = generate_world(tiny_config(), seeds.next_u64());
    const EnsembleModel e = perturb_members(w, 4, 0.5, seeds.next_u64());
    for (const UncertaintyKind kind :
         {UncertaintyKind::Total, UncertaintyKind::Aleatoric, UncertaintyKind::Epistemic}) {
      for (InputId i = 0; i < w.num_inputs(); ++i) {
        DecodeConfig cfg;
        cfg.beam_width = 4;
        cfg.max_len = w.max_len;
        cfg.kind = kind;
        cfg.lambda = 0.0;
        CHECK(same_ranking(uabs::uabs(e, i, cfg), beam_search(e, i, cfg)));
      }
    }
  }
}

TEST_CASE("identical members neutralize the epistemic kind at any lambda") {
  const WorldSpec w = generate_world(tiny_config(), 23);
  const EnsembleModel e = perturb_members(w, 4, 0.0, 1);
  DecodeConfig plain;
  plain.beam_width = 3;
  plain.max_len = w.max_len;
  DecodeConfig penalized = plain;
  penalized.kind = UncertaintyKind::Epistemic;
  penalized.lambda = 7.5;
  for (InputId i = 0; i < w.num_inputs(); ++i) {
    CHECK(same_ranking(uabs::uabs(e, i, penalized), beam_search(e, i, plain)));
  }
}

TEST_CASE("saturated beams match the exhaustive oracle") {
  Rng seeds(0x4ac1e);
  for (int trial = 0; trial < 10; ++trial) {
    const WorldSpec w = generate_world(tiny_config(), seeds.next_u64());
    const EnsembleModel e = perturb_members(w, 3, 0.6, seeds.next_u64());
    for (const double lambda : {0.0, 0.5, 2.0}) {
      for (const UncertaintyKind kind :
           {UncertaintyKind::Total, UncertaintyKind::Aleatoric,
            UncertaintyKind::Epistemic}) {
        DecodeConfig cfg;
        cfg.beam_width = 100000;
        cfg.max_len = w.max_len;
        cfg.lambda = lambda;
        cfg.kind = kind;
        for (InputId i = 0; i < w.num_inputs(); ++i) {
          const Hypothesis oracle = exhaustive_decode(e, i, lambda, kind, w.max_len);
          const std::vector<Hypothesis> beam = uabs::uabs(e, i, cfg);
          REQUIRE(!beam.empty());
          CHECK(beam.front().tokens == oracle.tokens);
          CHECK(beam.front().cum_logp == oracle.cum_logp);
        }
      }
    }
  }
}

TEST_CASE("oracle-selected uncertainty never rises with lambda") {
  Rng seeds(0x900d);
  for (int trial = 0; trial < 25; ++trial) {
    const WorldSpec w = generate_world(tiny_config(), seeds.next_u64());
    const EnsembleModel e = perturb_members(w, 4, 0.5, seeds.next_u64());
    for (const UncertaintyKind kind :
         {UncertaintyKind::Total, UncertaintyKind::Aleatoric,
          UncertaintyKind::Epistemic}) {
      double prev = -1.0;
      bool first = true;
      for (const double lambda : {0.0, 0.25, 1.0, 4.0, 16.0}) {
        const Hypothesis h = exhaustive_decode(e, 0, lambda, kind, w.max_len);
        const double u = uncertainty_component(h.cum_unc, kind);
        if (!first) CHECK(u <= prev + 1e-12);
        prev = u;
        first = false;
      }
    }
  }
}

TEST_CASE("score additivity: stored accumulators match a fresh replay") {
  const WorldSpec w = generate_world(tiny_config(8, 6), 77);
  const EnsembleModel e = perturb_members(w, 5, 0.4, 3);
  DecodeConfig cfg;
  cfg.beam_width = 4;
  cfg.max_len = w.max_len;
  cfg.lambda = 1.5;
  cfg.kind = UncertaintyKind::Total;
  for (InputId i = 0; i < w.num_inputs(); ++i) {
    for (const Hypothesis& hyp : uabs::uabs(e, i, cfg)) {
      const std::vector<StepRecord> steps = replay(e, i, hyp.tokens);
      double logp = 0.0;
      UncertaintyBreakdown sums;
      for (const StepRecord& s : steps) {
        logp += s.logp;
        sums.aleatoric += s.breakdown.aleatoric;
        sums.epistemic += s.breakdown.epistemic;
      }
      CHECK(std::fabs(logp - hyp.cum_logp) <= 1e-9);
      CHECK(std::fabs(sums.aleatoric - hyp.cum_unc.aleatoric) <= 1e-9);
      CHECK(std::fabs(sums.epistemic - hyp.cum_unc.epistemic) <= 1e-9);
    }
  }
}

TEST_CASE("within one parent, extension order ignores the shared penalty") {
  const WorldSpec w = generate_world(tiny_config(), 41);
  const EnsembleModel e = perturb_members(w, 4, 0.7, 11);
  const Context c{0, {}};
  // All extensions of the same parent share the same penalty, so their
  // penalized order equals their probability order.
  std::vector<Hypothesis> children;
  const auto [agg, bd] = step_scores(e, c);
  for (TokenId v = 0; v < agg.size(); ++v) {
    if (agg[v] == 0.0) continue;
    Hypothesis child;
    child.tokens = {v};
    child.cum_logp = agg.log_prob(v);
    child.cum_unc = bd;
    children.push_back(child);
  }
  REQUIRE(children.size() >= 2);
  for (std::size_t a = 0; a < children.size(); ++a) {
    for (std::size_t b = 0; b < children.size(); ++b) {
      if (children[a].cum_logp == children[b].cum_logp) continue;
      const bool by_logp = children[a].cum_logp > children[b].cum_logp;
      const bool penalized =
          hypothesis_precedes(children[a], children[b], 3.0, UncertaintyKind::Total);
      CHECK(by_logp == penalized);
    }
  }
}

TEST_CASE("sampling is seed-deterministic and respects the horizon") {
  const WorldSpec w = generate_world(tiny_config(8, 5), 0x5a5a);
  const EnsembleModel e = perturb_members(w, 4, 0.5, 2);
  for (InputId i = 0; i < w.num_inputs(); ++i) {
    const Hypothesis a = sample(e, i, 1234, w.max_len);
    const Hypothesis b = sample(e, i, 1234, w.max_len);
    CHECK(a.tokens == b.tokens);
    CHECK(a.cum_logp == b.cum_logp);
    CHECK(a.tokens.size() <= w.max_len);
    CHECK(a.finished);
    CHECK(a.tokens.back() == kEos);
  }
  // Different seeds eventually differ on a stochastic world.
  bool any_difference = false;
  for (std::uint64_t s = 0; s < 20 && !any_difference; ++s) {
    any_difference = sample(e, 0, s, w.max_len).tokens !=
                     sample(e, 0, s + 1000, w.max_len).tokens;
  }
  CHECK(any_difference);
}

TEST_CASE("decode configuration errors") {
  const EnsembleModel e = chain_ensemble(2);
  DecodeConfig cfg;
  cfg.beam_width = 0;
  CHECK(category_of([&] { beam_search(e, 0, cfg); }) == ErrorCategory::InvalidConfig);
  cfg = DecodeConfig{};
  cfg.lambda = 0.5;
  CHECK(category_of([&] { beam_search(e, 0, cfg); }) == ErrorCategory::InvalidConfig);
  CHECK_NOTHROW(uabs::uabs(e, 0, cfg));
  cfg = DecodeConfig{};
  cfg.lambda = -1.0;
  CHECK(category_of([&] { uabs::uabs(e, 0, cfg); }) == ErrorCategory::InvalidConfig);
  CHECK(category_of([&] {
          exhaustive_decode(e, 0, 0.0, UncertaintyKind::Total, 3, 0);
        }) == ErrorCategory::InvalidConfig);
}

TEST_CASE("enumeration cap trips on oversized spaces") {
  const WorldSpec w = generate_world(tiny_config(6, 4), 3);
  const EnsembleModel e = perturb_members(w, 2, 0.3, 9);
  CHECK(category_of([&] {
          exhaustive_decode(e, 0, 0.0, UncertaintyKind::Total, w.max_len, 1);
        }) == ErrorCategory::SearchSpaceTooLarge);
}
