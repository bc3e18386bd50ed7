#include "uabs/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "uabs/error.hpp"

namespace uabs {

double hallucination_probability(const Categorical& d, const std::vector<TokenId>& h) {
  double sum = 0.0;
  for (const TokenId v : h) sum += d.prob(v);
  return sum;
}

std::vector<LabeledPrediction> label_outputs(const WorldSpec& w, const EnsembleModel& e,
                                             const std::vector<DecodedOutput>& outputs) {
  if (e.members.empty() || e.members.front().vocab_size() != w.vocab.size() ||
      e.members.front().num_inputs() != w.num_inputs()) {
    fail(ErrorCategory::WorldMismatch, "ensemble shape disagrees with the world");
  }
  std::vector<LabeledPrediction> out;
  for (const DecodedOutput& output : outputs) {
    if (output.input >= w.num_inputs()) {
      fail(ErrorCategory::WorldMismatch,
           "output for input " + std::to_string(output.input) +
               " which the world does not have");
    }
    for (const TokenId t : output.hyp.tokens) {
      if (t >= w.vocab.size()) {
        fail(ErrorCategory::WorldMismatch,
             "output token " + std::to_string(t) + " outside the world's vocabulary");
      }
    }
    const std::vector<TokenId> halluc =
        hallucination_set(w, Context{output.input, {}});
    const std::vector<StepRecord> steps = replay(e, output.input, output.hyp.tokens);
    Context c{output.input, {}};
    for (const StepRecord& step : steps) {
      if (w.vocab.is_content(step.token)) {
        out.push_back(LabeledPrediction{
            c, step.token, step.breakdown,
            std::binary_search(halluc.begin(), halluc.end(), step.token)});
      }
      c.prefix.push_back(step.token);
    }
  }
  return out;
}

BinTable bin_rates(const std::vector<LabeledPrediction>& preds,
                   const std::vector<double>& edges, UncertaintyKind kind) {
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i] < edges[i + 1])) {
      fail(ErrorCategory::UnsortedEdges, "bin edges must be strictly ascending");
    }
  }
  BinTable table;
  table.edges = edges;
  table.bins.assign(edges.size() + 1, BinRow{});
  for (const LabeledPrediction& p : preds) {
    const double value = uncertainty_component(p.breakdown, kind);
    const std::size_t bin =
        std::lower_bound(edges.begin(), edges.end(), value) - edges.begin();
    table.bins[bin].count += 1;
    if (p.hallucinated) table.bins[bin].hallucinated += 1;
  }
  for (BinRow& row : table.bins) {
    if (row.count > 0) {
      row.defined = true;
      row.rate = static_cast<double>(row.hallucinated) / static_cast<double>(row.count);
    }
  }
  return table;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    fail(ErrorCategory::ShapeMismatch, "series lengths differ");
  }
  if (xs.size() < 2) {
    fail(ErrorCategory::ShapeMismatch, "correlation needs at least two points");
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail(ErrorCategory::DegenerateVariance,
         "correlation undefined for a constant series");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double pearson(const std::vector<bool>& flags, const std::vector<double>& values) {
  std::vector<double> xs(flags.size());
  for (std::size_t i = 0; i < flags.size(); ++i) xs[i] = flags[i] ? 1.0 : 0.0;
  return pearson(xs, values);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    fail(ErrorCategory::ShapeMismatch, "series lengths differ");
  }
  return pearson(average_ranks(xs), average_ranks(ys));
}

RateResult hallucination_rate(const std::vector<DecodedOutput>& outputs,
                              const WorldSpec& w) {
  if (outputs.empty()) {
    fail(ErrorCategory::InvariantViolation, "no outputs to rate");
  }
  RateResult result;
  for (const DecodedOutput& output : outputs) {
    const std::vector<TokenId> halluc =
        hallucination_set(w, Context{output.input, {}});
    for (const TokenId t : output.hyp.tokens) {
      if (!w.vocab.is_content(t)) continue;
      result.mentions += 1;
      if (std::binary_search(halluc.begin(), halluc.end(), t)) {
        result.hallucinated += 1;
      }
    }
  }
  if (result.mentions > 0) {
    result.defined = true;
    result.rate =
        static_cast<double>(result.hallucinated) / static_cast<double>(result.mentions);
  }
  return result;
}

SummaryStats summary_stats(const std::vector<DecodedOutput>& outputs,
                           const WorldSpec& w) {
  if (outputs.empty()) {
    fail(ErrorCategory::InvariantViolation, "no outputs to summarize");
  }
  SummaryStats stats;
  std::size_t token_total = 0;
  std::size_t generic = 0;
  for (const DecodedOutput& output : outputs) {
    std::size_t mentions_here = 0;
    for (const TokenId t : output.hyp.tokens) {
      if (t == kBos || t == kEos) continue;
      token_total += 1;
      if (w.vocab.is_content(t)) mentions_here += 1;
    }
    stats.mention_count += mentions_here;
    if (mentions_here == 0) generic += 1;
  }
  stats.avg_len = static_cast<double>(token_total) / static_cast<double>(outputs.size());
  stats.generic_rate = static_cast<double>(generic) / static_cast<double>(outputs.size());
  return stats;
}

double quality_proxy(const WorldSpec& w, const std::vector<DecodedOutput>& outputs) {
  if (outputs.empty()) {
    fail(ErrorCategory::InvariantViolation, "no outputs to score");
  }
  const double uniform = 1.0 / static_cast<double>(w.vocab.size());
  double total = 0.0;
  for (const DecodedOutput& output : outputs) {
    Context c{output.input, {}};
    double loglik = 0.0;
    for (const TokenId t : output.hyp.tokens) {
      const Categorical& dist = w.true_model.score(c);
      const double p =
          (1.0 - kQualitySmoothing) * dist.prob(t) + kQualitySmoothing * uniform;
      loglik += std::log(p);
      c.prefix.push_back(t);
    }
    total += loglik;
  }
  return total / static_cast<double>(outputs.size());
}

std::vector<double> default_lambda_grid(UncertaintyKind kind) {
  if (kind == UncertaintyKind::Epistemic) return {10.0, 20.0, 40.0, 80.0};
  return {0.1, 0.2, 0.4, 0.8, 1.0, 2.0, 4.0};
}

std::vector<SweepPointResult> sweep_outputs(const WorldSpec& w, const EnsembleModel& e,
                                            const std::vector<SweepPoint>& grid,
                                            const SweepOptions& options) {
  if (grid.empty()) fail(ErrorCategory::InvalidConfig, "empty sweep grid");
  const std::size_t max_len = options.max_len == 0 ? w.max_len : options.max_len;
  if (max_len < 1) fail(ErrorCategory::InvalidConfig, "max_len must be at least 1");
  if (options.jobs < 1) fail(ErrorCategory::InvalidConfig, "jobs must be at least 1");
  if (!options.exhaustive && options.beam_width < 1) {
    fail(ErrorCategory::InvalidConfig, "beam_width must be at least 1");
  }

  std::vector<SweepPointResult> results(grid.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto run_point = [&](std::size_t g) {
    const SweepPoint& point = grid[g];
    std::vector<DecodedOutput> outputs;
    outputs.reserve(w.num_inputs());
    for (InputId i = 0; i < w.num_inputs(); ++i) {
      if (options.exhaustive) {
        outputs.push_back(DecodedOutput{
            i, exhaustive_decode(e, i, point.lambda, point.kind, max_len, options.cap)});
      } else {
        DecodeConfig cfg;
        cfg.beam_width = options.beam_width;
        cfg.lambda = point.lambda;
        cfg.kind = point.kind;
        cfg.max_len = max_len;
        outputs.push_back(DecodedOutput{i, uabs(e, i, cfg).front()});
      }
    }
    TradeoffRecord rec;
    rec.kind = point.kind;
    rec.lambda = point.lambda;
    rec.quality = quality_proxy(w, outputs);
    rec.hallucination_rate = hallucination_rate(outputs, w).rate;
    const SummaryStats stats = summary_stats(outputs, w);
    rec.avg_len = stats.avg_len;
    rec.mention_count = stats.mention_count;
    rec.generic_rate = stats.generic_rate;
    results[g] = SweepPointResult{rec, std::move(outputs)};
  };

  if (options.jobs == 1 || grid.size() == 1) {
    for (std::size_t g = 0; g < grid.size(); ++g) run_point(g);
  } else {
    std::atomic<std::size_t> cursor{0};
    const std::size_t workers = std::min(options.jobs, grid.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t g = cursor.fetch_add(1);
          if (g >= grid.size()) return;
          try {
            run_point(g);
          } catch (...) {
            const std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return results;
}

std::vector<TradeoffRecord> sweep(const WorldSpec& w, const EnsembleModel& e,
                                  const std::vector<SweepPoint>& grid,
                                  const SweepOptions& options) {
  std::vector<TradeoffRecord> records;
  records.reserve(grid.size());
  for (SweepPointResult& r : sweep_outputs(w, e, grid, options)) {
    records.push_back(r.record);
  }
  return records;
}

}  // namespace uabs
