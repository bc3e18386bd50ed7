// Release gate. Each numbered check prints exactly one PASS/FAIL line and the
// process exits nonzero if any fails. Checks are seeded and self-contained;
// the ones that pin a world state the full configuration inline so a failure
// is reproducible from the line alone.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <limits>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "uabs/analysis.hpp"
#include "uabs/decode.hpp"
#include "uabs/ensemble.hpp"
#include "uabs/prob.hpp"
#include "uabs/rng.hpp"
#include "uabs/world.hpp"

namespace fs = std::filesystem;
using namespace uabs;

namespace {

int g_failures = 0;

void report(int num, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", num, name.c_str(),
              detail.empty() ? "" : " | ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

// Runs one criterion body, turning exceptions into a FAIL line.
void criterion(int num, const std::string& name,
               const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(num, name, pass, detail);
  } catch (const std::exception& e) {
    report(num, name, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

Categorical one_hot(std::size_t size, TokenId on) {
  std::vector<double> p(size, 0.0);
  p[on] = 1.0;
  return Categorical(std::move(p));
}

Categorical uniform(std::size_t size) {
  return Categorical(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

// Random member over V tokens: one-hot, spiky, mid, or flat.
Categorical random_member(Rng& rng, std::size_t vocab) {
  const std::uint64_t style = rng.uniform_below(4);
  if (style == 0) return one_hot(vocab, static_cast<TokenId>(rng.uniform_below(vocab)));
  const double conc = style == 1 ? 0.1 : style == 2 ? 1.0 : 5.0;
  std::vector<double> w(vocab);
  for (double& x : w) x = rng.gamma(conc);
  return normalize(w);
}

std::pair<bool, std::string> check_decomposition_bulk() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t member_counts[] = {1, 2, 5, 10};
  const std::size_t vocab_sizes[] = {2, 8, 64};
  Rng rng(901);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < 10000; ++i) {
    const std::size_t m = member_counts[i % 4];
    const std::size_t v = vocab_sizes[(i / 4) % 3];
    EnsembleDistribution members;
    members.reserve(m);
    for (std::size_t k = 0; k < m; ++k) members.push_back(random_member(rng, v));
    const UncertaintyBreakdown b = decompose(members);
    if (b.total() != b.aleatoric + b.epistemic) ++bad;
    if (b.epistemic < -1e-9) ++bad;
    if (m == 1 && b.epistemic != 0.0) ++bad;
    if (b.epistemic > std::log(static_cast<double>(m)) + 1e-9) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 10.0,
          fmt("10000 ensembles, %zu violations, %.2fs (budget 10s)", bad, secs)};
}

std::pair<bool, std::string> check_closed_forms() {
  double worst = 0.0;
  for (const std::size_t m : {1, 2, 5, 10}) {
    for (const std::size_t v : {2, 8, 64}) {
      const EnsembleDistribution members(m, uniform(v));
      worst = std::max(worst, std::fabs(decompose(members).epistemic));
    }
  }
  for (const std::size_t v : {2, 8}) {
    const EnsembleDistribution members{one_hot(v, 0), one_hot(v, 1)};
    const UncertaintyBreakdown b = decompose(members);
    worst = std::max(worst, std::fabs(b.total() - std::log(2.0)));
    worst = std::max(worst, std::fabs(b.aleatoric));
    worst = std::max(worst, std::fabs(b.epistemic - std::log(2.0)));
  }
  return {worst <= 1e-12, fmt("worst deviation %.3g (bound 1e-12)", worst)};
}

// Small random worlds shared by the reduction and monotonicity checks.
struct TinyCase {
  WorldSpec world;
  EnsembleModel ensemble;
  std::size_t max_len;
};

TinyCase tiny_case(std::uint64_t tag, std::size_t index, bool cheap_oracle) {
  Rng prng(derive_seed(tag, "cfg", index));
  WorldConfig cfg;
  cfg.vocab_size = 6 + prng.uniform_below(cheap_oracle ? 3 : 7);
  cfg.function_tokens = 1 + prng.uniform_below(2);
  cfg.num_inputs = 2 + prng.uniform_below(5);
  cfg.order = cheap_oracle ? 1 : 1 + prng.uniform_below(2);
  cfg.grounded_fraction = prng.uniform(0.3, 0.9);
  cfg.max_len = 3 + prng.uniform_below(cheap_oracle ? 2 : 4);
  cfg.leak = prng.uniform(0.0, 0.5);
  cfg.min_support = 1;
  cfg.max_support = 1 + prng.uniform_below(3);
  cfg.min_concentration = prng.uniform(0.2, 0.8);
  cfg.max_concentration = cfg.min_concentration + prng.uniform(0.0, 1.5);
  cfg.eos_bias = prng.uniform(0.3, 2.0);
  TinyCase t{generate_world(cfg, derive_seed(tag, "world", index)), EnsembleModel{}, cfg.max_len};
  const std::size_t members = 1 + prng.uniform_below(4);
  const double noise = prng.uniform(0.0, 1.0);
  t.ensemble = perturb_members(t.world, members, noise, derive_seed(tag, "ens", index));
  return t;
}

constexpr UncertaintyKind kKinds[] = {UncertaintyKind::Total, UncertaintyKind::Aleatoric,
                                      UncertaintyKind::Epistemic};

std::pair<bool, std::string> check_lambda_zero_reduction() {
  std::size_t mismatches = 0, compared = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const TinyCase t = tiny_case(3000, i, false);
    for (InputId input = 0; input < t.world.num_inputs(); ++input) {
      for (const UncertaintyKind kind : kKinds) {
        DecodeConfig dc;
        dc.beam_width = 4;
        dc.lambda = 0.0;
        dc.kind = kind;
        dc.max_len = t.max_len;
        const auto plain = beam_search(t.ensemble, input, dc);
        const auto penalized = uabs::uabs(t.ensemble, input, dc);
        ++compared;
        if (plain.size() != penalized.size()) {
          ++mismatches;
          continue;
        }
        for (std::size_t r = 0; r < plain.size(); ++r) {
          if (plain[r].tokens != penalized[r].tokens ||
              plain[r].finished != penalized[r].finished) {
            ++mismatches;
            break;
          }
        }
      }
    }
  }
  return {mismatches == 0,
          fmt("100 worlds, %zu beam comparisons, %zu mismatches", compared, mismatches)};
}

std::pair<bool, std::string> check_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t mismatches = 0, compared = 0;
  for (std::size_t i = 0; i < 25; ++i) {
    Rng prng(derive_seed(4000, "cfg", i));
    WorldConfig cfg;
    cfg.vocab_size = 5 + i % 2;
    cfg.function_tokens = 1;
    cfg.num_inputs = 2 + prng.uniform_below(3);
    cfg.order = 1;
    cfg.grounded_fraction = prng.uniform(0.4, 0.9);
    cfg.max_len = 3 + i % 2;
    cfg.leak = static_cast<double>(i % 3) * 0.4;
    cfg.min_support = 1;
    cfg.max_support = 3;
    cfg.min_concentration = 0.3;
    cfg.max_concentration = 1.5;
    cfg.eos_bias = 1.0;
    const WorldSpec w = generate_world(cfg, derive_seed(4000, "world", i));
    const EnsembleModel e =
        perturb_members(w, 2 + 2 * (i % 2), i % 2 ? 0.8 : 0.3, derive_seed(4000, "ens", i));
    for (InputId input = 0; input < w.num_inputs(); ++input) {
      for (const double lambda : {0.0, 0.5, 2.0, 20.0}) {
        for (const UncertaintyKind kind : kKinds) {
          DecodeConfig dc;
          dc.beam_width = 2000;  // |V|^max_len <= 6^4, so the beam holds everything
          dc.lambda = lambda;
          dc.kind = kind;
          dc.max_len = cfg.max_len;
          const auto beam = uabs::uabs(e, input, dc);
          const Hypothesis oracle = exhaustive_decode(e, input, lambda, kind, cfg.max_len);
          ++compared;
          if (beam.empty() || beam.front().tokens != oracle.tokens) ++mismatches;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          fmt("%zu decodes, %zu mismatches, %.2fs (budget 60s)", compared, mismatches)};
}

std::pair<bool, std::string> check_penalty_monotonicity() {
  std::size_t violations = 0, chains = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const TinyCase t = tiny_case(5000, i, true);
    for (InputId input = 0; input < t.world.num_inputs(); ++input) {
      for (const UncertaintyKind kind : kKinds) {
        ++chains;
        double prev = std::numeric_limits<double>::infinity();
        for (const double lambda : {0.0, 0.25, 1.0, 4.0, 16.0, 64.0}) {
          const Hypothesis h = exhaustive_decode(t.ensemble, input, lambda, kind, t.max_len);
          const double u = uncertainty_component(h.cum_unc, kind);
          if (u > prev + 1e-12) ++violations;
          prev = u;
        }
      }
    }
  }
  return {violations == 0, fmt("%zu penalty chains, %zu violations", chains, violations)};
}

std::pair<bool, std::string> check_sampling_consistency() {
  WorldConfig cfg;
  cfg.vocab_size = 16;
  cfg.function_tokens = 3;
  cfg.num_inputs = 40;
  cfg.order = 1;
  cfg.grounded_fraction = 0.4;
  cfg.max_len = 6;
  cfg.leak = 0.8;
  cfg.min_support = 2;
  cfg.max_support = 5;
  cfg.min_concentration = 0.5;
  cfg.max_concentration = 1.5;
  cfg.eos_bias = 1.0;
  const WorldSpec w = generate_world(cfg, 711);
  const EnsembleModel e = perturb_members(w, 5, 0.5, 1);

  // Fixed contexts: the first 20 inputs whose start-context aggregate puts
  // usable mass on the hallucination set.
  std::vector<InputId> picked;
  std::vector<double> expected;
  for (InputId i = 0; i < cfg.num_inputs && picked.size() < 20; ++i) {
    const Context c{i, {}};
    const auto [agg, breakdown] = step_scores(e, c);
    const double p = hallucination_probability(agg, hallucination_set(w, c));
    if (p >= 0.02 && p <= 0.6) {
      picked.push_back(i);
      expected.push_back(p);
    }
  }
  if (picked.size() < 20) return {false, fmt("only %zu usable contexts", picked.size())};

  constexpr std::size_t kSamples = 100000;
  std::vector<double> zs(picked.size(), 0.0);
  std::vector<std::thread> pool;
  for (int worker = 0; worker < 4; ++worker) {
    pool.emplace_back([&, worker] {
      for (std::size_t k = worker; k < picked.size(); k += 4) {
        const InputId input = picked[k];
        const auto hset = hallucination_set(w, Context{input, {}});
        std::size_t hits = 0;
        for (std::size_t r = 0; r < kSamples; ++r) {
          const Hypothesis h = sample(e, input, derive_seed(711, "mc", input, r), 1);
          if (std::binary_search(hset.begin(), hset.end(), h.tokens.at(0))) ++hits;
        }
        const double freq = static_cast<double>(hits) / kSamples;
        const double se = std::sqrt(expected[k] * (1.0 - expected[k]) / kSamples);
        zs[k] = (freq - expected[k]) / se;
      }
    });
  }
  for (auto& th : pool) th.join();
  double zmax = 0.0;
  for (const double z : zs) zmax = std::max(zmax, std::fabs(z));
  return {zmax < 3.0, fmt("20 contexts x 1e5 draws, worst |z| = %.2f (bound 3)", zmax)};
}

// Shared by the binning and correlation checks: a sampled corpus on a world
// whose members disagree mostly about hallucinated-token mass.
struct LabeledCorpus {
  std::vector<LabeledPrediction> preds;
  double secs = 0.0;
};

const LabeledCorpus& correlation_corpus() {
  static const LabeledCorpus corpus = [] {
    const auto t0 = std::chrono::steady_clock::now();
    WorldConfig cfg;
    cfg.vocab_size = 20;
    cfg.function_tokens = 3;
    cfg.num_inputs = 64;
    cfg.order = 1;
    cfg.grounded_fraction = 0.3;
    cfg.max_len = 8;
    cfg.leak = 0.9;
    cfg.min_support = 3;
    cfg.max_support = 4;
    cfg.min_concentration = 0.8;
    cfg.max_concentration = 1.2;
    cfg.eos_bias = 1.0;
    const WorldSpec w = generate_world(cfg, 513);
    const EnsembleModel e = perturb_members(w, 10, 0.3, 1);
    std::vector<DecodedOutput> outs;
    outs.reserve(cfg.num_inputs * 320);
    for (InputId i = 0; i < cfg.num_inputs; ++i) {
      for (std::size_t rep = 0; rep < 320; ++rep) {
        DecodedOutput o;
        o.input = i;
        o.hyp = sample(e, i, derive_seed(513 * 131 + 1, "corpus", i, rep), cfg.max_len);
        outs.push_back(std::move(o));
      }
    }
    LabeledCorpus c;
    c.preds = label_outputs(w, e, outs);
    c.secs = seconds_since(t0);
    return c;
  }();
  return corpus;
}

std::pair<bool, std::string> check_bin_monotonicity() {
  const LabeledCorpus& corpus = correlation_corpus();
  const BinTable table = bin_rates(corpus.preds, kDefaultBinEdges, UncertaintyKind::Total);
  std::vector<double> idx, rate;
  for (std::size_t b = 0; b < table.bins.size(); ++b) {
    if (table.bins[b].defined) {
      idx.push_back(static_cast<double>(b));
      rate.push_back(table.bins[b].rate);
    }
  }
  if (idx.size() < 2) return {false, fmt("only %zu occupied bins", idx.size())};
  const double rho = spearman(idx, rate);
  const bool pass = corpus.preds.size() >= 20000 && rho > 0.0 && corpus.secs < 120.0;
  return {pass, fmt("%zu mentions, %zu occupied bins, spearman %+.3f, %.1fs (budget 120s)",
                    corpus.preds.size(), idx.size(), rho, corpus.secs)};
}

std::pair<bool, std::string> check_correlation_ordering() {
  const LabeledCorpus& corpus = correlation_corpus();
  std::vector<bool> flags;
  std::vector<double> ep, al;
  flags.reserve(corpus.preds.size());
  ep.reserve(corpus.preds.size());
  al.reserve(corpus.preds.size());
  for (const LabeledPrediction& p : corpus.preds) {
    flags.push_back(p.hallucinated);
    ep.push_back(p.breakdown.epistemic);
    al.push_back(p.breakdown.aleatoric);
  }
  const double r_ep = pearson(flags, ep);
  const double r_al = pearson(flags, al);
  return {r_ep > r_al && r_al > 0.0,
          fmt("r(hallucinated, epistemic) %+.4f > r(hallucinated, aleatoric) %+.4f > 0",
              r_ep, r_al)};
}

std::pair<bool, std::string> check_tradeoff_sweep() {
  WorldConfig cfg;
  cfg.vocab_size = 14;
  cfg.function_tokens = 3;
  cfg.num_inputs = 256;
  cfg.order = 1;
  cfg.grounded_fraction = 0.5;
  cfg.max_len = 6;
  cfg.leak = 0.95;
  cfg.min_support = 2;
  cfg.max_support = 4;
  cfg.min_concentration = 0.5;
  cfg.max_concentration = 1.2;
  cfg.eos_bias = 0.2;
  const WorldSpec w = generate_world(cfg, 1150);
  const EnsembleModel e = perturb_members(w, 4, 0.5, 1);

  std::vector<SweepPoint> grid{{UncertaintyKind::Epistemic, 0.0}};
  for (const double lambda : default_lambda_grid(UncertaintyKind::Epistemic)) {
    grid.push_back({UncertaintyKind::Epistemic, lambda});
  }
  SweepOptions options;
  options.exhaustive = true;
  options.cap = 800000;
  options.jobs = 4;
  const std::vector<TradeoffRecord> rows = sweep(w, e, grid, options);

  bool rate_strictly_down = true, quality_down = true, len_down = true;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      if (!(rows[i].hallucination_rate < rows[i - 1].hallucination_rate))
        rate_strictly_down = false;
      if (!(rows[i].quality <= rows[i - 1].quality)) quality_down = false;
      if (!(rows[i].avg_len <= rows[i - 1].avg_len)) len_down = false;
    }
    detail += fmt("%s[l=%g rate=%.4f qual=%.3f len=%.2f]", i ? " " : "", rows[i].lambda,
                  rows[i].hallucination_rate, rows[i].quality, rows[i].avg_len);
  }
  return {rate_strictly_down && quality_down && len_down, detail};
}

// ---- CLI determinism ----

struct CliRun {
  int exit_code = -1;
  std::string err;
};

CliRun run_cli(const std::string& bin, const std::string& args, const fs::path& scratch) {
  const fs::path err_file = scratch / "stderr.txt";
  const std::string cmd =
      "\"" + bin + "\" " + args + " > /dev/null 2> " + err_file.string();
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(err_file, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  r.err = buf.str();
  return r;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    files[fs::relative(entry.path(), root).string()] = buf.str();
  }
  return files;
}

std::pair<bool, std::string> check_cli_determinism() {
  const char* bin = std::getenv("UABS_CLI");
  if (bin == nullptr) {
    return {false, "UABS_CLI is not set; point it at the built command-line binary"};
  }
  const fs::path root = fs::temp_directory_path() /
                        ("uabs_accept_" + std::to_string(::getpid()));
  fs::create_directories(root);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{root};

  const std::string world_dir = (root / "w").string();
  const std::string ens_dir = (root / "e").string();
  const std::string world_file = world_dir + "/world.json";
  const std::string ens_file = ens_dir + "/ensemble.json";
  const std::string pair_flags = " --world " + world_file + " --ensemble " + ens_file;
  const std::vector<std::string> pipeline = {
      "world --seed 11 --vocab-size 12 --function-tokens 2 --inputs 6 --max-len 6"
      " --leak 0.3 --out " + world_dir,
      "ensemble --world " + world_file + " --members 4 --noise 0.6 --seed 5 --out " +
          ens_dir,
      "decode" + pair_flags + " --lambda 0.5 --kind epistemic --beam-width 3 --out " +
          (root / "db").string(),
      "decode" + pair_flags + " --mode sample --seed 9 --out " + (root / "ds").string(),
      "sweep" + pair_flags + " --kinds total,epistemic --lambdas 0,1 --beam-width 3"
      " --jobs 2 --out " + (root / "s").string(),
      "analyze" + pair_flags + " --decodes " + (root / "ds").string() +
          "/decodes.jsonl --out " + (root / "a").string(),
      "report --sweep " + (root / "s").string() + " --out " + (root / "r").string(),
  };

  const auto snapshot_all = [&root] {
    std::map<std::string, std::string> snap;
    for (const char* d : {"w", "e", "db", "ds", "s", "a", "r"}) {
      for (auto& [rel, bytes] : snapshot_tree(root / d)) {
        snap[std::string(d) + "/" + rel] = bytes;
      }
    }
    return snap;
  };

  for (const std::string& args : pipeline) {
    const CliRun r = run_cli(bin, args, root);
    if (r.exit_code != 0) return {false, "command failed: " + args + " | " + r.err};
  }
  const auto snap = snapshot_all();
  for (const std::string& args : pipeline) {
    const CliRun r = run_cli(bin, args + " --overwrite", root);
    if (r.exit_code != 0) return {false, "rerun failed: " + args + " | " + r.err};
  }
  const auto snap2 = snapshot_all();

  if (snap.size() != snap2.size()) {
    return {false, fmt("artifact sets differ: %zu vs %zu files", snap.size(), snap2.size())};
  }
  std::size_t identical = 0;
  for (const auto& [rel, bytes] : snap) {
    const auto it = snap2.find(rel);
    if (it == snap2.end() || it->second != bytes) {
      return {false, "artifact differs across reruns: " + rel};
    }
    ++identical;
  }
  return {true, fmt("%zu artifacts byte-identical across regeneration", identical)};
}

}  // namespace

int main() {
  criterion(1, "decomposition exact and epistemic nonnegative on random ensembles",
            check_decomposition_bulk);
  criterion(2, "closed-form decompositions", check_closed_forms);
  criterion(3, "penalized search at lambda zero reduces to plain beam search",
            check_lambda_zero_reduction);
  criterion(4, "beam matches the exhaustive oracle when the beam saturates",
            check_oracle_equivalence);
  criterion(5, "selected uncertainty is monotone in the penalty weight",
            check_penalty_monotonicity);
  criterion(6, "sampled hallucination frequency matches step probability",
            check_sampling_consistency);
  criterion(7, "hallucination rate rises across uncertainty bins", check_bin_monotonicity);
  criterion(8, "epistemic uncertainty is the stronger hallucination correlate",
            check_correlation_ordering);
  criterion(9, "penalty sweep trades hallucinations for quality monotonically",
            check_tradeoff_sweep);
  criterion(10, "CLI artifacts regenerate byte-identically", check_cli_determinism);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
