#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uabs/ensemble.hpp"
#include "uabs/prob.hpp"

namespace uabs {

/// Reserved token indices. Every vocabulary places BOS at 0 and EOS at 1.
inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;

enum class TokenTag { Special, Function, Content };

/// Index of a conditioning input (the structured data a sequence is
/// generated from).
using InputId = std::uint32_t;

/// Fixed token inventory. Layout: BOS, EOS, function tokens, content tokens.
/// Only content tokens can ever be hallucinated.
class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, std::vector<TokenTag> tags);

  /// Builds a synthetic vocabulary of the given total size with
  /// `function_tokens` function words. Token strings come from small fixed
  /// word pools (numbered past the pool) so decoded sequences read as text.
  static Vocab synthetic(std::size_t size, std::size_t function_tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenTag tag(TokenId id) const;
  bool is_content(TokenId id) const { return tag(id) == TokenTag::Content; }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<TokenTag>& tags() const noexcept { return tags_; }

  /// All content-token ids, ascending.
  std::vector<TokenId> content_ids() const;

 private:
  std::vector<std::string> tokens_;
  std::vector<TokenTag> tags_;
};

/// Conditioning input plus the tokens generated so far (BOS implicit).
struct Context {
  InputId input = 0;
  std::vector<TokenId> prefix;
};

/// Order-k tabular conditional model: maps (input, last-k token window) to a
/// next-token distribution; unseen windows fall back to a fixed distribution.
/// Once EOS has been emitted the score is a one-hot on EOS regardless of the
/// table, so finished sequences can stay in a beam.
class TabularModel {
 public:
  using Key = std::pair<InputId, std::vector<TokenId>>;
  using Table = std::map<Key, Categorical>;

  TabularModel(std::size_t order, std::size_t vocab_size, std::size_t num_inputs,
               Categorical fallback);

  /// Inserts or replaces the distribution for (input, window).
  /// The window must have exactly `order` tokens.
  void set_entry(InputId input, std::vector<TokenId> window, Categorical dist);

  /// Next-token distribution for the context. Throws UnknownInput when the
  /// input id is out of range, OutOfVocab on bad prefix tokens,
  /// InvariantViolation when the prefix continues past EOS.
  const Categorical& score(const Context& c) const;

  /// The last `order` prefix tokens, left-padded with BOS.
  std::vector<TokenId> window_of(const std::vector<TokenId>& prefix) const;

  const Categorical* find(InputId input, const std::vector<TokenId>& window) const;

  std::size_t order() const noexcept { return order_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t num_inputs() const noexcept { return num_inputs_; }
  const Categorical& fallback() const noexcept { return fallback_; }
  const Table& table() const noexcept { return table_; }

 private:
  std::size_t order_;
  std::size_t vocab_size_;
  std::size_t num_inputs_;
  Categorical fallback_;
  Categorical eos_onehot_;
  Table table_;
};

/// Generation knobs for synthetic worlds. See generate_world.
struct WorldConfig {
  std::size_t vocab_size = 32;     // total tokens including BOS/EOS, >= 4
  std::size_t function_tokens = 6; // >= 1; content count = vocab_size - 2 - function_tokens >= 1
  std::size_t num_inputs = 16;     // >= 1
  std::size_t order = 1;           // Markov order k >= 1
  double grounded_fraction = 0.6;  // in (0, 1]; per input, ceil(fraction * #content) tokens grounded
  std::size_t max_len = 10;        // >= 1; every true-model sequence emits EOS by this length
  double leak = 0.1;               // in [0, 1); ceiling on hallucinated mass of perturbed members
  std::size_t min_support = 2;     // >= 1
  std::size_t max_support = 6;     // >= min_support; non-EOS successors per window
  double min_concentration = 0.2;  // > 0; Dirichlet concentration range for window distributions
  double max_concentration = 3.0;  // >= min_concentration
  double eos_bias = 0.25;          // > 0; concentration multiplier for EOS

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
};

/// A complete synthetic generation task: vocabulary, per-input grounded
/// content sets, and a true model that provably never emits an ungrounded
/// content token.
struct WorldSpec {
  Vocab vocab;
  std::vector<std::vector<TokenId>> grounded; // per input, sorted content ids
  TabularModel true_model;
  double leak = 0.0;
  std::uint64_t seed = 0;
  std::size_t max_len = 0;

  std::size_t num_inputs() const noexcept { return grounded.size(); }
};

/// Ensemble of same-shape tabular models. `world_digest` identifies the world
/// the members were derived from (digest of its canonical serialization);
/// empty when constructed in memory without provenance.
struct EnsembleModel {
  std::vector<TabularModel> members;
  std::string world_digest;

  std::size_t size() const noexcept { return members.size(); }

  /// Member-wise next-token distributions, member order preserved.
  EnsembleDistribution score(const Context& c) const;
};

/// Content tokens that are false information for this context's input:
/// the complement of the grounded set within the content tokens. Function
/// tokens, BOS, and EOS are never hallucinated. Sorted ascending. The set
/// depends on the context only through its input. Throws UnknownInput.
std::vector<TokenId> hallucination_set(const WorldSpec& w, const Context& c);

/// Deterministically builds a world from (cfg, seed).
///
/// Construction: per input, windows are grown breadth-first from the start
/// window; each window's successors are EOS plus a random subset of
/// function/grounded tokens with ids strictly greater than the window's last
/// token, weighted by a Dirichlet draw. Strictly increasing ids make the
/// window graph acyclic; a second pass forces a one-hot EOS at every window
/// whose longest path from the start has reached max_len - 1 emissions, so
/// every true-model sequence terminates within max_len. Ungrounded content
/// tokens are never in any support.
WorldSpec generate_world(const WorldConfig& cfg, std::uint64_t seed);

/// Derives M ensemble members from the true model. Per window with support
/// size > 1: multiplicative log-normal jitter (scale `noise`) on the true
/// support, plus injection of at most `leak` total mass onto hallucinated
/// tokens above the window's last token. The split across those tokens is
/// world-seeded, so members share leak targets and differ only in how much
/// mass they move. One-hot windows are copied verbatim. noise = 0 returns
/// bitwise copies of the true model.
///
/// Members additionally carry private entries at the successor windows of
/// their leak targets: each mixes EOS with its own continuation token there.
/// The true model has no support at these post-hallucination contexts, so
/// this is where members disagree, concentrating epistemic uncertainty on
/// unsupported continuations.
///
/// Deterministic under (w, M, noise, seed). Throws InvalidConfig.
EnsembleModel perturb_members(const WorldSpec& w, std::size_t members, double noise,
                              std::uint64_t seed);

/// Verifies the world's structural invariants: valid distributions, windows
/// shaped to the order, zero true-model mass on every hallucination set, an
/// EOS-certain fallback, and EOS certainty at every window whose longest
/// path from the start has used up max_len - 1 emissions (so every sequence
/// terminates in time). Throws InvariantViolation.
void validate_world(const WorldSpec& w);

/// Joins token strings with single spaces, skipping BOS/EOS.
std::string detokenize(const Vocab& v, const std::vector<TokenId>& tokens);

}  // namespace uabs
