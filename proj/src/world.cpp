#include "uabs/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>

#include "uabs/error.hpp"
#include "uabs/rng.hpp"

namespace uabs {

namespace {

const char* const kFunctionPool[] = {"the", "a",    "is",   "on", "and",
                                     "with", "near", "of",  "under", "by"};
const char* const kContentPool[] = {"cat",   "dog",   "table", "cake",
                                    "tree",  "car",   "bird",  "fish",
                                    "house", "river", "cloud", "stone",
                                    "apple", "horse", "lamp",  "boat"};

std::string pooled_name(const char* const* pool, std::size_t pool_size, std::size_t i) {
  const std::string base = pool[i % pool_size];
  const std::size_t round = i / pool_size;
  if (round == 0) return base;
  return base + std::to_string(round + 1);
}

std::uint64_t hash_tokens(const std::vector<TokenId>& tokens) {
  std::uint64_t s = 0x51caab1eULL + tokens.size();
  for (const TokenId t : tokens) {
    s ^= t * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
    s = splitmix64(s);
  }
  return splitmix64(s);
}

std::vector<TokenId> shift_window(const std::vector<TokenId>& window, TokenId next) {
  std::vector<TokenId> out(window.begin() + 1, window.end());
  out.push_back(next);
  return out;
}

Categorical eos_onehot(std::size_t vocab_size) {
  std::vector<double> p(vocab_size, 0.0);
  p[kEos] = 1.0;
  return Categorical(std::move(p));
}

/// Longest number of emissions from the start window to each stored window
/// of one input. Valid because supports only contain ids above the window's
/// last token, so the window graph is acyclic and ordering stored windows by
/// (last token, lexicographic) is topological.
std::map<std::vector<TokenId>, std::size_t> longest_depths(
    const TabularModel& model, InputId input) {
  std::vector<const std::vector<TokenId>*> windows;
  for (const auto& [key, dist] : model.table()) {
    if (key.first == input) windows.push_back(&key.second);
  }
  std::sort(windows.begin(), windows.end(),
            [](const std::vector<TokenId>* a, const std::vector<TokenId>* b) {
              if (a->back() != b->back()) return a->back() < b->back();
              return *a < *b;
            });
  std::map<std::vector<TokenId>, std::size_t> depth;
  depth[std::vector<TokenId>(model.order(), kBos)] = 0;
  for (const std::vector<TokenId>* w : windows) {
    const auto it = depth.find(*w);
    if (it == depth.end()) continue;  // not reachable from the start window
    const std::size_t d = it->second;
    const Categorical* dist = model.find(input, *w);
    for (TokenId v = 0; v < dist->size(); ++v) {
      if ((*dist)[v] == 0.0 || v == kEos) continue;
      std::vector<TokenId> succ = shift_window(*w, v);
      if (model.find(input, succ) == nullptr) continue;
      auto [sit, inserted] = depth.try_emplace(std::move(succ), d + 1);
      if (!inserted && sit->second < d + 1) sit->second = d + 1;
    }
  }
  return depth;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens, std::vector<TokenTag> tags)
    : tokens_(std::move(tokens)), tags_(std::move(tags)) {
  if (tokens_.size() != tags_.size()) {
    fail(ErrorCategory::ShapeMismatch, "token/tag count mismatch");
  }
  if (tokens_.size() < 3) {
    fail(ErrorCategory::InvariantViolation, "vocabulary needs BOS, EOS and at least one token");
  }
  if (tags_[kBos] != TokenTag::Special || tags_[kEos] != TokenTag::Special) {
    fail(ErrorCategory::InvariantViolation, "indices 0 and 1 must be the BOS/EOS specials");
  }
  for (std::size_t i = 2; i < tags_.size(); ++i) {
    if (tags_[i] == TokenTag::Special) {
      fail(ErrorCategory::InvariantViolation,
           "special tag outside the reserved indices at " + std::to_string(i));
    }
  }
  std::set<std::string> seen;
  for (const std::string& t : tokens_) {
    if (!seen.insert(t).second) {
      fail(ErrorCategory::InvariantViolation, "duplicate token string: " + t);
    }
  }
}

Vocab Vocab::synthetic(std::size_t size, std::size_t function_tokens) {
  if (size < 4) fail(ErrorCategory::InvalidConfig, "vocab_size must be at least 4");
  if (function_tokens < 1 || function_tokens + 3 > size) {
    fail(ErrorCategory::InvalidConfig,
         "function_tokens must leave at least one content token");
  }
  std::vector<std::string> tokens{"<bos>", "<eos>"};
  std::vector<TokenTag> tags{TokenTag::Special, TokenTag::Special};
  for (std::size_t i = 0; i < function_tokens; ++i) {
    tokens.push_back(pooled_name(kFunctionPool, std::size(kFunctionPool), i));
    tags.push_back(TokenTag::Function);
  }
  for (std::size_t i = 0; i + 2 + function_tokens < size; ++i) {
    tokens.push_back(pooled_name(kContentPool, std::size(kContentPool), i));
    tags.push_back(TokenTag::Content);
  }
  return Vocab(std::move(tokens), std::move(tags));
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) {
    fail(ErrorCategory::OutOfVocab, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

TokenTag Vocab::tag(TokenId id) const {
  if (id >= tags_.size()) {
    fail(ErrorCategory::OutOfVocab, "token id " + std::to_string(id) + " out of range");
  }
  return tags_[id];
}

std::vector<TokenId> Vocab::content_ids() const {
  std::vector<TokenId> out;
  for (TokenId id = 0; id < tags_.size(); ++id) {
    if (tags_[id] == TokenTag::Content) out.push_back(id);
  }
  return out;
}

TabularModel::TabularModel(std::size_t order, std::size_t vocab_size,
                           std::size_t num_inputs, Categorical fallback)
    : order_(order),
      vocab_size_(vocab_size),
      num_inputs_(num_inputs),
      fallback_(std::move(fallback)),
      eos_onehot_(eos_onehot(vocab_size)) {
  if (order_ < 1) fail(ErrorCategory::InvalidConfig, "order must be at least 1");
  if (vocab_size_ < 3) fail(ErrorCategory::InvalidConfig, "vocab_size must be at least 3");
  if (num_inputs_ < 1) fail(ErrorCategory::InvalidConfig, "num_inputs must be at least 1");
  if (fallback_.size() != vocab_size_) {
    fail(ErrorCategory::ShapeMismatch, "fallback size does not match vocab_size");
  }
}

void TabularModel::set_entry(InputId input, std::vector<TokenId> window,
                             Categorical dist) {
  if (input >= num_inputs_) {
    fail(ErrorCategory::UnknownInput, "input " + std::to_string(input) + " out of range");
  }
  if (window.size() != order_) {
    fail(ErrorCategory::ShapeMismatch, "window length does not match model order");
  }
  for (const TokenId t : window) {
    if (t >= vocab_size_) {
      fail(ErrorCategory::OutOfVocab, "window token " + std::to_string(t) + " out of range");
    }
  }
  if (dist.size() != vocab_size_) {
    fail(ErrorCategory::ShapeMismatch, "distribution size does not match vocab_size");
  }
  table_.insert_or_assign(Key(input, std::move(window)), std::move(dist));
}

std::vector<TokenId> TabularModel::window_of(const std::vector<TokenId>& prefix) const {
  std::vector<TokenId> window(order_, kBos);
  const std::size_t take = std::min(order_, prefix.size());
  for (std::size_t i = 0; i < take; ++i) {
    window[order_ - take + i] = prefix[prefix.size() - take + i];
  }
  return window;
}

const Categorical* TabularModel::find(InputId input,
                                      const std::vector<TokenId>& window) const {
  const auto it = table_.find(Key(input, window));
  return it == table_.end() ? nullptr : &it->second;
}

const Categorical& TabularModel::score(const Context& c) const {
  if (c.input >= num_inputs_) {
    fail(ErrorCategory::UnknownInput, "input " + std::to_string(c.input) + " out of range");
  }
  for (std::size_t i = 0; i < c.prefix.size(); ++i) {
    if (c.prefix[i] >= vocab_size_) {
      fail(ErrorCategory::OutOfVocab,
           "prefix token " + std::to_string(c.prefix[i]) + " out of range");
    }
    if (c.prefix[i] == kEos && i + 1 != c.prefix.size()) {
      fail(ErrorCategory::InvariantViolation, "prefix continues past EOS");
    }
  }
  if (!c.prefix.empty() && c.prefix.back() == kEos) return eos_onehot_;
  const Categorical* stored = find(c.input, window_of(c.prefix));
  return stored != nullptr ? *stored : fallback_;
}

EnsembleDistribution EnsembleModel::score(const Context& c) const {
  if (members.empty()) {
    fail(ErrorCategory::InvariantViolation, "ensemble with zero members");
  }
  EnsembleDistribution out;
  out.reserve(members.size());
  for (const TabularModel& m : members) out.push_back(m.score(c));
  return out;
}

void WorldConfig::validate() const {
  if (vocab_size < 4) fail(ErrorCategory::InvalidConfig, "vocab_size must be at least 4");
  if (function_tokens < 1 || function_tokens + 3 > vocab_size) {
    fail(ErrorCategory::InvalidConfig,
         "function_tokens must leave at least one content token");
  }
  if (num_inputs < 1) fail(ErrorCategory::InvalidConfig, "num_inputs must be at least 1");
  if (order < 1) fail(ErrorCategory::InvalidConfig, "order must be at least 1");
  if (!(grounded_fraction > 0.0) || grounded_fraction > 1.0 ||
      !std::isfinite(grounded_fraction)) {
    fail(ErrorCategory::InvalidConfig, "grounded_fraction must be in (0, 1]");
  }
  if (max_len < 1) fail(ErrorCategory::InvalidConfig, "max_len must be at least 1");
  if (!(leak >= 0.0) || leak >= 1.0) {
    fail(ErrorCategory::InvalidConfig, "leak must be in [0, 1)");
  }
  if (min_support < 1) fail(ErrorCategory::InvalidConfig, "min_support must be at least 1");
  if (max_support < min_support) {
    fail(ErrorCategory::InvalidConfig, "max_support must be at least min_support");
  }
  if (!(min_concentration > 0.0) || !std::isfinite(min_concentration)) {
    fail(ErrorCategory::InvalidConfig, "min_concentration must be positive");
  }
  if (max_concentration < min_concentration || !std::isfinite(max_concentration)) {
    fail(ErrorCategory::InvalidConfig, "max_concentration must be at least min_concentration");
  }
  if (!(eos_bias > 0.0) || !std::isfinite(eos_bias)) {
    fail(ErrorCategory::InvalidConfig, "eos_bias must be positive");
  }
}

std::vector<TokenId> hallucination_set(const WorldSpec& w, const Context& c) {
  if (c.input >= w.grounded.size()) {
    fail(ErrorCategory::UnknownInput, "input " + std::to_string(c.input) + " out of range");
  }
  const std::vector<TokenId>& grounded = w.grounded[c.input];
  std::vector<TokenId> out;
  for (const TokenId id : w.vocab.content_ids()) {
    if (!std::binary_search(grounded.begin(), grounded.end(), id)) out.push_back(id);
  }
  return out;
}

WorldSpec generate_world(const WorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Vocab vocab = Vocab::synthetic(cfg.vocab_size, cfg.function_tokens);
  const std::vector<TokenId> content = vocab.content_ids();

  std::vector<std::vector<TokenId>> grounded(cfg.num_inputs);
  for (InputId i = 0; i < cfg.num_inputs; ++i) {
    const std::size_t want = std::min<std::size_t>(
        content.size(),
        static_cast<std::size_t>(
            std::ceil(cfg.grounded_fraction * static_cast<double>(content.size()) - 1e-12)));
    Rng rng(derive_seed(seed, "ground", i));
    std::vector<TokenId> pool = content;
    for (std::size_t j = 0; j < want; ++j) {
      const std::size_t pick = j + rng.uniform_below(pool.size() - j);
      std::swap(pool[j], pool[pick]);
    }
    grounded[i].assign(pool.begin(), pool.begin() + want);
    std::sort(grounded[i].begin(), grounded[i].end());
  }

  TabularModel model(cfg.order, cfg.vocab_size, cfg.num_inputs,
                     eos_onehot(cfg.vocab_size));
  const std::vector<TokenId> start(cfg.order, kBos);

  for (InputId i = 0; i < cfg.num_inputs; ++i) {
    std::deque<std::vector<TokenId>> queue{start};
    std::set<std::vector<TokenId>> visited{start};
    while (!queue.empty()) {
      const std::vector<TokenId> window = std::move(queue.front());
      queue.pop_front();

      std::vector<TokenId> candidates;
      for (TokenId v = window.back() + 1; v < cfg.vocab_size; ++v) {
        if (vocab.tag(v) == TokenTag::Function ||
            std::binary_search(grounded[i].begin(), grounded[i].end(), v)) {
          candidates.push_back(v);
        }
      }
      if (candidates.empty()) continue;  // fallback (one-hot EOS) covers this window

      Rng rng(derive_seed(seed, "win", i, hash_tokens(window)));
      const std::size_t lo = std::min(cfg.min_support, candidates.size());
      const std::size_t hi = std::min(cfg.max_support, candidates.size());
      const std::size_t take = lo + rng.uniform_below(hi - lo + 1);
      for (std::size_t j = 0; j < take; ++j) {
        const std::size_t pick = j + rng.uniform_below(candidates.size() - j);
        std::swap(candidates[j], candidates[pick]);
      }
      std::vector<TokenId> support(candidates.begin(), candidates.begin() + take);
      std::sort(support.begin(), support.end());

      const double alpha =
          std::exp(rng.uniform(std::log(cfg.min_concentration), std::log(cfg.max_concentration)));
      std::vector<double> weights(cfg.vocab_size, 0.0);
      weights[kEos] = rng.gamma(alpha * cfg.eos_bias);
      for (const TokenId v : support) weights[v] = rng.gamma(alpha);
      model.set_entry(i, window, normalize(weights));

      for (const TokenId v : support) {
        std::vector<TokenId> succ = shift_window(window, v);
        if (visited.insert(succ).second) queue.push_back(std::move(succ));
      }
    }

    // Cap path lengths: any window whose longest path has already consumed
    // max_len - 1 emissions must spend its last one on EOS.
    const auto depth = longest_depths(model, i);
    for (const auto& [window, d] : depth) {
      if (d + 1 < cfg.max_len) continue;
      if (model.find(i, window) != nullptr) {
        model.set_entry(i, window, eos_onehot(cfg.vocab_size));
      }
    }

    // Forcing can orphan deeper windows; drop entries no longer reachable.
    const auto reachable = longest_depths(model, i);
    std::set<std::vector<TokenId>> dead;
    for (const auto& [key, dist] : model.table()) {
      if (key.first == i && reachable.find(key.second) == reachable.end()) {
        dead.insert(key.second);
      }
    }
    if (!dead.empty()) {
      TabularModel pruned(cfg.order, cfg.vocab_size, cfg.num_inputs,
                          eos_onehot(cfg.vocab_size));
      for (const auto& [key, dist] : model.table()) {
        if (key.first == i && dead.count(key.second) != 0) continue;
        pruned.set_entry(key.first, key.second, dist);
      }
      model = std::move(pruned);
    }
  }

  WorldSpec world{std::move(vocab), std::move(grounded), std::move(model),
                  cfg.leak, seed, cfg.max_len};
  validate_world(world);
  return world;
}

EnsembleModel perturb_members(const WorldSpec& w, std::size_t members, double noise,
                              std::uint64_t seed) {
  if (members < 1) fail(ErrorCategory::InvalidConfig, "members must be at least 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    fail(ErrorCategory::InvalidConfig, "noise must be finite and nonnegative");
  }
  EnsembleModel out;
  out.members.reserve(members);
  if (noise == 0.0) {
    for (std::size_t m = 0; m < members; ++m) out.members.push_back(w.true_model);
    return out;
  }

  const std::size_t vocab_size = w.true_model.vocab_size();
  for (std::size_t m = 0; m < members; ++m) {
    const std::uint64_t member_seed = derive_seed(seed, "member", m);
    TabularModel model(w.true_model.order(), vocab_size, w.true_model.num_inputs(),
                       w.true_model.fallback());
    for (const auto& [key, dist] : w.true_model.table()) {
      const auto& [input, window] = key;
      std::vector<TokenId> support;
      for (TokenId v = 0; v < vocab_size; ++v) {
        if (dist[v] > 0.0) support.push_back(v);
      }
      if (support.size() <= 1) {
        model.set_entry(input, window, dist);
        continue;
      }

      Rng rng(derive_seed(member_seed, "mwin", input, hash_tokens(window)));
      std::vector<double> jittered(vocab_size, 0.0);
      double jitter_sum = 0.0;
      for (const TokenId v : support) {
        jittered[v] = dist[v] * std::exp(noise * rng.normal());
        jitter_sum += jittered[v];
      }

      std::vector<TokenId> targets;
      for (const TokenId h : hallucination_set(w, Context{input, {}})) {
        if (h > window.back()) targets.push_back(h);
      }
      double ell = 0.0;
      std::vector<double> target_weights;
      if (!targets.empty() && w.leak > 0.0) {
        // Per-window headroom and the split across hallucinated tokens are
        // world properties: shared by every member and every perturb call,
        // and larger where the true model is less certain. Members agree on
        // which wrong tokens attract mass and differ in how much they leak.
        const double spread = std::min(1.0, dist.entropy() / 2.0);
        Rng cap_rng(derive_seed(w.seed, "leakcap", input, hash_tokens(window)));
        const double cap = w.leak * spread * cap_rng.uniform01();
        ell = cap * rng.uniform01();
        double tw_sum = 0.0;
        target_weights.resize(targets.size());
        for (std::size_t t = 0; t < targets.size(); ++t) {
          target_weights[t] = cap_rng.gamma(0.5);
          tw_sum += target_weights[t];
        }
        if (tw_sum == 0.0 || ell <= 0.0) {
          ell = 0.0;
        } else {
          for (double& tw : target_weights) tw /= tw_sum;
        }
      }

      std::vector<double> probs(vocab_size, 0.0);
      for (const TokenId v : support) {
        probs[v] = (1.0 - ell) * (jittered[v] / jitter_sum);
      }
      if (ell > 0.0) {
        for (std::size_t t = 0; t < targets.size(); ++t) {
          probs[targets[t]] += ell * target_weights[t];
        }
      }
      model.set_entry(input, window, Categorical(std::move(probs)));

      // Members also commit to private beliefs about what follows a
      // hallucinated token. The true model has no support there, so this is
      // where members disagree: each mixes a mostly-EOS belief with its own
      // continuation token, the mixture growing with noise. Without these
      // entries every member would fall back to the same EOS one-hot and
      // hallucinated continuations would carry zero epistemic uncertainty.
      if (!targets.empty() && w.leak > 0.0) {
        const double post_mix = 0.25 * (1.0 - std::exp(-noise));
        for (const TokenId v : targets) {
          std::vector<TokenId> post = shift_window(window, v);
          Rng prng(derive_seed(member_seed, "post", input, hash_tokens(post)));
          std::vector<TokenId> continuations;
          for (TokenId u = 0; u < vocab_size; ++u) {
            if (u != v && w.vocab.is_content(u)) continuations.push_back(u);
          }
          std::vector<double> pw(vocab_size, 0.0);
          const double beta = continuations.empty()
                                  ? 0.0
                                  : post_mix * (0.4 + 0.6 * prng.uniform01());
          pw[kEos] = 1.0 - beta;
          if (beta > 0.0) {
            pw[continuations[prng.uniform_below(continuations.size())]] = beta;
          }
          model.set_entry(input, std::move(post), Categorical(std::move(pw)));
        }
      }
    }
    out.members.push_back(std::move(model));
  }
  return out;
}

void validate_world(const WorldSpec& w) {
  const std::size_t vocab_size = w.vocab.size();
  if (w.true_model.vocab_size() != vocab_size) {
    fail(ErrorCategory::InvariantViolation, "model vocabulary size disagrees with vocab");
  }
  if (w.true_model.num_inputs() != w.grounded.size()) {
    fail(ErrorCategory::InvariantViolation, "model input count disagrees with groundings");
  }
  if (!(w.leak >= 0.0) || w.leak >= 1.0) {
    fail(ErrorCategory::InvariantViolation, "leak must be in [0, 1)");
  }
  if (w.max_len < 1) fail(ErrorCategory::InvariantViolation, "max_len must be at least 1");

  for (InputId i = 0; i < w.grounded.size(); ++i) {
    const std::vector<TokenId>& g = w.grounded[i];
    if (!std::is_sorted(g.begin(), g.end()) ||
        std::adjacent_find(g.begin(), g.end()) != g.end()) {
      fail(ErrorCategory::InvariantViolation,
           "grounded set of input " + std::to_string(i) + " not sorted/unique");
    }
    for (const TokenId t : g) {
      if (t >= vocab_size || !w.vocab.is_content(t)) {
        fail(ErrorCategory::InvariantViolation,
             "grounded set of input " + std::to_string(i) + " contains a non-content token");
      }
    }
  }

  if (w.true_model.fallback()[kEos] != 1.0) {
    fail(ErrorCategory::InvariantViolation, "fallback must put all mass on EOS");
  }

  for (const auto& [key, dist] : w.true_model.table()) {
    const auto& [input, window] = key;
    if (input >= w.grounded.size()) {
      fail(ErrorCategory::InvariantViolation, "table entry for unknown input");
    }
    if (window.size() != w.true_model.order()) {
      fail(ErrorCategory::InvariantViolation, "table window length disagrees with order");
    }
    for (const TokenId t : window) {
      if (t >= vocab_size) {
        fail(ErrorCategory::InvariantViolation, "table window token out of vocabulary");
      }
    }
    if (dist.size() != vocab_size) {
      fail(ErrorCategory::InvariantViolation, "table distribution size disagrees with vocab");
    }
    for (const TokenId h : hallucination_set(w, Context{input, {}})) {
      if (dist[h] != 0.0) {
        fail(ErrorCategory::InvariantViolation,
             "true model puts mass on hallucinated token " + std::to_string(h) +
                 " for input " + std::to_string(input));
      }
    }
  }

  for (InputId i = 0; i < w.grounded.size(); ++i) {
    for (const auto& [window, d] : longest_depths(w.true_model, i)) {
      if (d + 1 < w.max_len) continue;
      const Categorical* dist = w.true_model.find(i, window);
      if (dist != nullptr && (*dist)[kEos] != 1.0) {
        fail(ErrorCategory::InvariantViolation,
             "window at the length limit does not force EOS for input " + std::to_string(i));
      }
    }
  }
}

std::string detokenize(const Vocab& v, const std::vector<TokenId>& tokens) {
  std::string out;
  for (const TokenId t : tokens) {
    if (t == kBos || t == kEos) continue;
    if (!out.empty()) out += ' ';
    out += v.token(t);
  }
  return out;
}

}  // namespace uabs
