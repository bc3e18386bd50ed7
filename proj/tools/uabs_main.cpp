// Command-line driver: world generation, ensemble creation, decoding, grid
// sweeps, analysis tables, and report emission. Every run writes a manifest
// carrying the resolved configuration, all seeds, and content digests, so any
// artifact can be regenerated byte-identically. Errors leave a single-line
// JSON record on stderr and a nonzero exit code.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uabs/analysis.hpp"
#include "uabs/decode.hpp"
#include "uabs/digest.hpp"
#include "uabs/error.hpp"
#include "uabs/rng.hpp"
#include "uabs/serialize.hpp"
#include "uabs/version.hpp"
#include "uabs/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit_error(const std::string& category, const std::string& message) {
  json record;
  record["error"]["category"] = category;
  record["error"]["message"] = message;
  std::cerr << record.dump() << "\n";
}

// Full-precision decimal form, stable across runs. Infinities print as
// "inf" / "-inf".
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Compact form for file names and the report, still deterministic.
std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Resolves the output directory. A non-empty existing directory is never
// reused without --overwrite: the run lands in a timestamped sibling instead,
// so earlier artifacts are never clobbered silently.
fs::path resolve_out_dir(const std::string& requested, bool overwrite) {
  if (requested.empty()) uabs::fail(uabs::ErrorCategory::InvalidConfig, "--out is empty");
  fs::path out(requested);
  std::error_code ec;
  if (fs::exists(out, ec)) {
    if (!fs::is_directory(out, ec)) {
      uabs::fail(uabs::ErrorCategory::Io,
                 "--out exists and is not a directory: " + out.string());
    }
    if (!fs::is_empty(out, ec) && !overwrite) {
      const std::time_t now = std::time(nullptr);
      std::tm tm{};
      gmtime_r(&now, &tm);
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
      fs::path base = out;
      base += "-";
      base += stamp;
      fs::path unique = base;
      for (int n = 1; fs::exists(unique, ec); ++n) {
        unique = base;
        unique += "-" + std::to_string(n);
      }
      out = unique;
    }
  }
  fs::create_directories(out, ec);
  if (ec) uabs::fail(uabs::ErrorCategory::Io, "cannot create " + out.string());
  return out;
}

// Manifest assembly. Inputs are recorded with the paths given on the command
// line plus content digests; outputs with paths relative to the manifest.
class Manifest {
 public:
  Manifest(std::string subcommand, fs::path out_dir)
      : out_dir_(std::move(out_dir)) {
    doc_["schema"] = uabs::kManifestSchema;
    doc_["tool_version"] = uabs::kToolVersion;
    doc_["subcommand"] = std::move(subcommand);
    doc_["config"] = json::object();
    doc_["seeds"] = json::object();
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::object();
  }

  json& config() { return doc_["config"]; }
  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }

  void input(const std::string& name, const std::string& path_as_given) {
    doc_["inputs"][name] = {{"path", path_as_given},
                            {"sha256", uabs::file_sha256_hex(path_as_given)}};
  }

  // Registers a file already written into the output directory.
  void output(const std::string& filename) {
    doc_["outputs"][filename] = {
        {"path", filename},
        {"sha256", uabs::file_sha256_hex((out_dir_ / filename).string())}};
  }

  void write() const {
    uabs::write_file((out_dir_ / "manifest.json").string(), doc_.dump(2) + "\n");
  }

  const fs::path& out_dir() const { return out_dir_; }

 private:
  json doc_;
  fs::path out_dir_;
};

json breakdown_json(const uabs::UncertaintyBreakdown& b) {
  return {{"total", b.total()}, {"aleatoric", b.aleatoric}, {"epistemic", b.epistemic}};
}

// One record per decoded input; optional per-step trace recomputed by replay.
void write_decodes_file(const fs::path& path, const uabs::WorldSpec& w,
                        const uabs::EnsembleModel& e, const std::string& w_digest,
                        const std::string& e_digest, const json& config,
                        const std::vector<uabs::DecodedOutput>& outputs, bool trace) {
  std::string text;
  json header;
  header["schema"] = uabs::kDecodesSchema;
  header["world_digest"] = w_digest;
  header["ensemble_digest"] = e_digest;
  header["config"] = config;
  text += header.dump() + "\n";
  for (const uabs::DecodedOutput& out : outputs) {
    json rec;
    rec["input"] = out.input;
    rec["tokens"] = out.hyp.tokens;
    rec["text"] = uabs::detokenize(w.vocab, out.hyp.tokens);
    rec["finished"] = out.hyp.finished;
    rec["cum_logp"] = out.hyp.cum_logp;
    rec["unc"] = breakdown_json(out.hyp.cum_unc);
    if (trace) {
      json steps = json::array();
      for (const uabs::StepRecord& step : uabs::replay(e, out.input, out.hyp.tokens)) {
        json s;
        s["token"] = step.token;
        s["token_text"] = w.vocab.token(step.token);
        s["logp"] = step.logp;
        s["unc"] = breakdown_json(step.breakdown);
        steps.push_back(std::move(s));
      }
      rec["steps"] = std::move(steps);
    }
    text += rec.dump() + "\n";
  }
  uabs::write_file(path.string(), text);
}

struct DecodesFile {
  json header;
  std::vector<uabs::DecodedOutput> outputs;
};

DecodesFile read_decodes_file(const std::string& path) {
  const std::string text = uabs::read_file(path);
  DecodesFile out;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      uabs::fail(uabs::ErrorCategory::InvariantViolation,
                 "decodes file contains an unparseable line");
    }
    if (first) {
      first = false;
      if (!doc.contains("schema") || !doc["schema"].is_string()) {
        uabs::fail(uabs::ErrorCategory::InvariantViolation,
                   "decodes file header lacks a schema field");
      }
      if (doc["schema"] != uabs::kDecodesSchema) {
        uabs::fail(uabs::ErrorCategory::SchemaVersionMismatch,
                   "expected schema " + std::string(uabs::kDecodesSchema));
      }
      out.header = std::move(doc);
      continue;
    }
    try {
      uabs::DecodedOutput rec;
      rec.input = doc.at("input").get<uabs::InputId>();
      rec.hyp.tokens = doc.at("tokens").get<std::vector<uabs::TokenId>>();
      rec.hyp.finished = doc.at("finished").get<bool>();
      rec.hyp.cum_logp = doc.at("cum_logp").get<double>();
      rec.hyp.cum_unc.aleatoric = doc.at("unc").at("aleatoric").get<double>();
      rec.hyp.cum_unc.epistemic = doc.at("unc").at("epistemic").get<double>();
      out.outputs.push_back(std::move(rec));
    } catch (const json::exception& ex) {
      uabs::fail(uabs::ErrorCategory::InvariantViolation,
                 std::string("malformed decode record: ") + ex.what());
    }
  }
  if (first) {
    uabs::fail(uabs::ErrorCategory::InvariantViolation, "decodes file is empty");
  }
  return out;
}

// Loads a world/ensemble pair and verifies they belong together.
struct LoadedPair {
  uabs::WorldSpec world;
  uabs::EnsembleModel ensemble;
  std::string world_digest;
  std::string ensemble_digest;
};

LoadedPair load_pair(const std::string& world_path, const std::string& ensemble_path) {
  LoadedPair p{uabs::load_world(world_path), uabs::load_ensemble(ensemble_path), {}, {}};
  p.world_digest = uabs::world_digest(p.world);
  p.ensemble_digest = uabs::sha256_hex(uabs::ensemble_to_json(p.ensemble));
  if (p.ensemble.world_digest != p.world_digest) {
    uabs::fail(uabs::ErrorCategory::WorldMismatch,
               "ensemble was built for a different world (digest " +
                   p.ensemble.world_digest + ", world is " + p.world_digest + ")");
  }
  return p;
}

json world_config_json(const uabs::WorldConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size},
          {"function_tokens", cfg.function_tokens},
          {"num_inputs", cfg.num_inputs},
          {"order", cfg.order},
          {"grounded_fraction", cfg.grounded_fraction},
          {"max_len", cfg.max_len},
          {"leak", cfg.leak},
          {"min_support", cfg.min_support},
          {"max_support", cfg.max_support},
          {"min_concentration", cfg.min_concentration},
          {"max_concentration", cfg.max_concentration},
          {"eos_bias", cfg.eos_bias}};
}

// ---------------------------------------------------------------- world ----

struct WorldArgs {
  std::string config_path;
  std::string out;
  bool overwrite = false;
  std::uint64_t seed = 1;
  uabs::WorldConfig cfg;
};

void apply_config_file(uabs::WorldConfig& cfg, const std::string& path) {
  const json doc = json::parse(uabs::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    uabs::fail(uabs::ErrorCategory::InvalidConfig,
               "config file is not a JSON object: " + path);
  }
  const std::map<std::string, std::function<void(const json&)>> setters{
      {"vocab_size", [&](const json& v) { cfg.vocab_size = v.get<std::size_t>(); }},
      {"function_tokens",
       [&](const json& v) { cfg.function_tokens = v.get<std::size_t>(); }},
      {"num_inputs", [&](const json& v) { cfg.num_inputs = v.get<std::size_t>(); }},
      {"order", [&](const json& v) { cfg.order = v.get<std::size_t>(); }},
      {"grounded_fraction",
       [&](const json& v) { cfg.grounded_fraction = v.get<double>(); }},
      {"max_len", [&](const json& v) { cfg.max_len = v.get<std::size_t>(); }},
      {"leak", [&](const json& v) { cfg.leak = v.get<double>(); }},
      {"min_support", [&](const json& v) { cfg.min_support = v.get<std::size_t>(); }},
      {"max_support", [&](const json& v) { cfg.max_support = v.get<std::size_t>(); }},
      {"min_concentration",
       [&](const json& v) { cfg.min_concentration = v.get<double>(); }},
      {"max_concentration",
       [&](const json& v) { cfg.max_concentration = v.get<double>(); }},
      {"eos_bias", [&](const json& v) { cfg.eos_bias = v.get<double>(); }},
  };
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      uabs::fail(uabs::ErrorCategory::InvalidConfig,
                 "unknown config field \"" + key + "\" in " + path);
    }
    try {
      it->second(value);
    } catch (const json::exception&) {
      uabs::fail(uabs::ErrorCategory::InvalidConfig,
                 "config field \"" + key + "\" has the wrong type in " + path);
    }
  }
}

int run_world(const WorldArgs& args) {
  args.cfg.validate();
  const uabs::WorldSpec w = uabs::generate_world(args.cfg, args.seed);
  const fs::path out = resolve_out_dir(args.out, args.overwrite);
  uabs::save_world(w, (out / "world.json").string());

  Manifest mf("world", out);
  mf.config() = world_config_json(args.cfg);
  mf.seed("world", args.seed);
  if (!args.config_path.empty()) mf.input("config", args.config_path);
  mf.output("world.json");
  mf.write();
  std::cout << out.string() << "\n";
  return 0;
}

// ------------------------------------------------------------- ensemble ----

struct EnsembleArgs {
  std::string world_path;
  std::string out;
  bool overwrite = false;
  std::size_t members = 5;
  double noise = 0.5;
  std::uint64_t seed = 1;
};

int run_ensemble(const EnsembleArgs& args) {
  const uabs::WorldSpec w = uabs::load_world(args.world_path);
  uabs::EnsembleModel e = uabs::perturb_members(w, args.members, args.noise, args.seed);
  e.world_digest = uabs::world_digest(w);
  const fs::path out = resolve_out_dir(args.out, args.overwrite);
  uabs::save_ensemble(e, (out / "ensemble.json").string());

  Manifest mf("ensemble", out);
  mf.config() = {{"members", args.members}, {"noise", args.noise}};
  mf.seed("ensemble", args.seed);
  mf.input("world", args.world_path);
  mf.output("ensemble.json");
  mf.write();
  std::cout << out.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- decode ----

struct DecodeArgs {
  std::string world_path;
  std::string ensemble_path;
  std::string out;
  bool overwrite = false;
  std::string mode = "beam";
  std::size_t beam_width = 5;
  double lambda = 0.0;
  std::string kind = "total";
  std::size_t max_len = 0;  // 0: the world's max_len
  std::size_t cap = 1000000;
  std::uint64_t seed = 1;
  bool trace = false;
  bool strict = false;
  std::vector<uabs::InputId> inputs;  // empty: all inputs
};

int run_decode(const DecodeArgs& args) {
  if (args.mode != "beam" && args.mode != "exhaustive" && args.mode != "sample") {
    uabs::fail(uabs::ErrorCategory::InvalidConfig,
               "--mode must be beam, exhaustive, or sample");
  }
  const uabs::UncertaintyKind kind = uabs::kind_from_string(args.kind);
  const LoadedPair p = load_pair(args.world_path, args.ensemble_path);
  const std::size_t max_len = args.max_len == 0 ? p.world.max_len : args.max_len;

  std::vector<uabs::InputId> inputs = args.inputs;
  if (inputs.empty()) {
    for (uabs::InputId i = 0; i < p.world.num_inputs(); ++i) inputs.push_back(i);
  }

  std::vector<uabs::DecodedOutput> outputs;
  outputs.reserve(inputs.size());
  for (const uabs::InputId i : inputs) {
    if (args.mode == "beam") {
      uabs::DecodeConfig cfg;
      cfg.beam_width = args.beam_width;
      cfg.lambda = args.lambda;
      cfg.kind = kind;
      cfg.max_len = max_len;
      cfg.strict = args.strict;
      outputs.push_back(uabs::DecodedOutput{i, uabs::uabs(p.ensemble, i, cfg).front()});
    } else if (args.mode == "exhaustive") {
      outputs.push_back(uabs::DecodedOutput{
          i, uabs::exhaustive_decode(p.ensemble, i, args.lambda, kind, max_len,
                                     args.cap)});
    } else {
      outputs.push_back(uabs::DecodedOutput{
          i, uabs::sample(p.ensemble, i, uabs::derive_seed(args.seed, "sample", i),
                          max_len)});
    }
  }

  // The records depend on the penalty kind only through the decoded
  // sequences, and with lambda = 0 not at all, so the kind is recorded in the
  // manifest (and sweep file names) rather than the decodes header: equal
  // decodes stay byte-identical.
  json header_config{{"mode", args.mode},
                     {"beam_width", args.beam_width},
                     {"lambda", args.lambda},
                     {"max_len", max_len},
                     {"cap", args.cap},
                     {"seed", args.seed},
                     {"strict", args.strict},
                     {"trace", args.trace}};

  const fs::path out = resolve_out_dir(args.out, args.overwrite);
  write_decodes_file(out / "decodes.jsonl", p.world, p.ensemble, p.world_digest,
                     p.ensemble_digest, header_config, outputs, args.trace);

  Manifest mf("decode", out);
  mf.config() = header_config;
  mf.config()["kind"] = uabs::to_string(kind);
  mf.config()["inputs"] = inputs;
  if (args.mode == "sample") mf.seed("sample", args.seed);
  mf.input("world", args.world_path);
  mf.input("ensemble", args.ensemble_path);
  mf.output("decodes.jsonl");
  mf.write();
  std::cout << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep ----

struct SweepArgs {
  std::string world_path;
  std::string ensemble_path;
  std::string out;
  bool overwrite = false;
  std::vector<std::string> kinds{"total", "aleatoric", "epistemic"};
  std::vector<double> lambdas;  // empty: the per-kind default grid
  std::string mode = "beam";
  std::size_t beam_width = 5;
  std::size_t max_len = 0;
  std::size_t cap = 1000000;
  std::size_t jobs = 1;
};

int run_sweep(const SweepArgs& args) {
  if (args.mode != "beam" && args.mode != "exhaustive") {
    uabs::fail(uabs::ErrorCategory::InvalidConfig, "--mode must be beam or exhaustive");
  }
  const LoadedPair p = load_pair(args.world_path, args.ensemble_path);

  std::vector<uabs::SweepPoint> grid;
  json grid_echo = json::array();
  for (const std::string& kind_name : args.kinds) {
    const uabs::UncertaintyKind kind = uabs::kind_from_string(kind_name);
    const std::vector<double> lambdas =
        args.lambdas.empty() ? uabs::default_lambda_grid(kind) : args.lambdas;
    for (const double lambda : lambdas) {
      grid.push_back(uabs::SweepPoint{kind, lambda});
      grid_echo.push_back({{"kind", uabs::to_string(kind)}, {"lambda", lambda}});
    }
  }

  uabs::SweepOptions options;
  options.beam_width = args.beam_width;
  options.exhaustive = args.mode == "exhaustive";
  options.max_len = args.max_len;
  options.jobs = args.jobs;
  options.cap = args.cap;
  const std::vector<uabs::SweepPointResult> results =
      uabs::sweep_outputs(p.world, p.ensemble, grid, options);

  const fs::path out = resolve_out_dir(args.out, args.overwrite);
  Manifest mf("sweep", out);

  const std::size_t max_len = options.max_len == 0 ? p.world.max_len : options.max_len;
  std::string table =
      "kind\tlambda\tquality\thallucination_rate\tavg_len\tmention_count\tgeneric_rate\n";
  for (const uabs::SweepPointResult& r : results) {
    const uabs::TradeoffRecord& rec = r.record;
    table += std::string(uabs::to_string(rec.kind)) + "\t" + fmt(rec.lambda) + "\t" +
             fmt(rec.quality) + "\t" + fmt(rec.hallucination_rate) + "\t" +
             fmt(rec.avg_len) + "\t" + std::to_string(rec.mention_count) + "\t" +
             fmt(rec.generic_rate) + "\n";

    json config{{"mode", args.mode},    {"beam_width", args.beam_width},
                {"lambda", rec.lambda}, {"max_len", max_len},
                {"cap", args.cap},      {"seed", 0},
                {"strict", false},      {"trace", false}};
    const std::string name = std::string("decodes_") + uabs::to_string(rec.kind) + "_" +
                             fmt_short(rec.lambda) + ".jsonl";
    write_decodes_file(out / name, p.world, p.ensemble, p.world_digest,
                       p.ensemble_digest, config, r.outputs, false);
    mf.output(name);
  }
  uabs::write_file((out / "tradeoff.tsv").string(), table);
  mf.output("tradeoff.tsv");

  mf.config() = {{"mode", args.mode},   {"beam_width", args.beam_width},
                 {"max_len", max_len},  {"cap", args.cap},
                 {"jobs", args.jobs},   {"grid", grid_echo}};
  mf.input("world", args.world_path);
  mf.input("ensemble", args.ensemble_path);
  mf.write();
  std::cout << out.string() << "\n";
  return 0;
}

// -------------------------------------------------------------- analyze ----

struct AnalyzeArgs {
  std::string world_path;
  std::string ensemble_path;
  std::string decodes_path;
  std::string out;
  bool overwrite = false;
  std::vector<double> edges = uabs::kDefaultBinEdges;
};

int run_analyze(const AnalyzeArgs& args) {
  const LoadedPair p = load_pair(args.world_path, args.ensemble_path);
  const DecodesFile decodes = read_decodes_file(args.decodes_path);
  if (decodes.header.value("world_digest", "") != p.world_digest) {
    uabs::fail(uabs::ErrorCategory::WorldMismatch,
               "decodes file was produced against a different world");
  }
  if (decodes.header.value("ensemble_digest", "") != p.ensemble_digest) {
    uabs::fail(uabs::ErrorCategory::WorldMismatch,
               "decodes file was produced against a different ensemble");
  }

  const std::vector<uabs::LabeledPrediction> preds =
      uabs::label_outputs(p.world, p.ensemble, decodes.outputs);

  static constexpr uabs::UncertaintyKind kKinds[] = {uabs::UncertaintyKind::Total,
                                                     uabs::UncertaintyKind::Aleatoric,
                                                     uabs::UncertaintyKind::Epistemic};

  std::string bins_tsv = "kind\tbin\tlo\thi\tcount\thallucinated\trate\n";
  for (const uabs::UncertaintyKind kind : kKinds) {
    const uabs::BinTable table = uabs::bin_rates(preds, args.edges, kind);
    for (std::size_t b = 0; b < table.bins.size(); ++b) {
      const double lo = b == 0 ? -std::numeric_limits<double>::infinity()
                               : table.edges[b - 1];
      const double hi = b == table.edges.size()
                            ? std::numeric_limits<double>::infinity()
                            : table.edges[b];
      const uabs::BinRow& row = table.bins[b];
      bins_tsv += std::string(uabs::to_string(kind)) + "\t" + std::to_string(b) + "\t" +
                  fmt(lo) + "\t" + fmt(hi) + "\t" + std::to_string(row.count) + "\t" +
                  std::to_string(row.hallucinated) + "\t" +
                  (row.defined ? fmt(row.rate) : std::string("NA")) + "\n";
    }
  }

  // Point-biserial correlation of the hallucination flag against each
  // uncertainty kind; NA when the coefficient is undefined.
  std::string corr_tsv = "kind\tpearson\tn\n";
  std::vector<bool> flags;
  flags.reserve(preds.size());
  for (const uabs::LabeledPrediction& pred : preds) flags.push_back(pred.hallucinated);
  for (const uabs::UncertaintyKind kind : kKinds) {
    std::vector<double> values;
    values.reserve(preds.size());
    for (const uabs::LabeledPrediction& pred : preds) {
      values.push_back(uabs::uncertainty_component(pred.breakdown, kind));
    }
    std::string cell = "NA";
    try {
      cell = fmt(uabs::pearson(flags, values));
    } catch (const uabs::Error& err) {
      if (err.category() != uabs::ErrorCategory::DegenerateVariance &&
          err.category() != uabs::ErrorCategory::ShapeMismatch) {
        throw;
      }
    }
    corr_tsv += std::string(uabs::to_string(kind)) + "\t" + cell + "\t" +
                std::to_string(preds.size()) + "\n";
  }

  const uabs::RateResult rate = uabs::hallucination_rate(decodes.outputs, p.world);
  const uabs::SummaryStats stats = uabs::summary_stats(decodes.outputs, p.world);
  const double quality = uabs::quality_proxy(p.world, decodes.outputs);
  std::string summary_tsv =
      "outputs\tmentions\thallucinated\thallucination_rate\tavg_len\tgeneric_rate\tquality\n";
  summary_tsv += std::to_string(decodes.outputs.size()) + "\t" +
                 std::to_string(rate.mentions) + "\t" +
                 std::to_string(rate.hallucinated) + "\t" +
                 (rate.defined ? fmt(rate.rate) : std::string("NA")) + "\t" +
                 fmt(stats.avg_len) + "\t" + fmt(stats.generic_rate) + "\t" +
                 fmt(quality) + "\n";

  const fs::path out = resolve_out_dir(args.out, args.overwrite);
  uabs::write_file((out / "bins.tsv").string(), bins_tsv);
  uabs::write_file((out / "correlations.tsv").string(), corr_tsv);
  uabs::write_file((out / "summary.tsv").string(), summary_tsv);

  Manifest mf("analyze", out);
  mf.config() = {{"edges", args.edges}};
  mf.input("world", args.world_path);
  mf.input("ensemble", args.ensemble_path);
  mf.input("decodes", args.decodes_path);
  mf.output("bins.tsv");
  mf.output("correlations.tsv");
  mf.output("summary.tsv");
  mf.write();
  std::cout << out.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- report ----

struct ReportArgs {
  std::string sweep_dir;
  std::string out;
  bool overwrite = false;
};

struct TradeoffRow {
  std::string kind;
  double lambda = 0.0;
  double quality = 0.0;
  double rate = 0.0;
  double avg_len = 0.0;
  std::size_t mentions = 0;
  double generic_rate = 0.0;
};

std::vector<TradeoffRow> parse_tradeoff_tsv(const std::string& text) {
  std::vector<TradeoffRow> rows;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t cell_pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', cell_pos);
      cells.push_back(line.substr(cell_pos, tab - cell_pos));
      if (tab == std::string::npos) break;
      cell_pos = tab + 1;
    }
    if (first) {
      first = false;
      if (cells.empty() || cells[0] != "kind") {
        uabs::fail(uabs::ErrorCategory::InvariantViolation,
                   "trade-off table has an unexpected header");
      }
      continue;
    }
    if (cells.size() != 7) {
      uabs::fail(uabs::ErrorCategory::InvariantViolation,
                 "trade-off table row has the wrong arity");
    }
    TradeoffRow row;
    row.kind = cells[0];
    row.lambda = std::stod(cells[1]);
    row.quality = std::stod(cells[2]);
    row.rate = std::stod(cells[3]);
    row.avg_len = std::stod(cells[4]);
    row.mentions = static_cast<std::size_t>(std::stoull(cells[5]));
    row.generic_rate = std::stod(cells[6]);
    rows.push_back(std::move(row));
  }
  return rows;
}

int run_report(const ReportArgs& args) {
  const fs::path sweep_dir(args.sweep_dir);
  const std::string manifest_path = (sweep_dir / "manifest.json").string();
  const std::string tradeoff_path = (sweep_dir / "tradeoff.tsv").string();
  const json manifest = json::parse(uabs::read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || manifest.value("schema", "") != uabs::kManifestSchema) {
    uabs::fail(uabs::ErrorCategory::InvariantViolation,
               "not a run manifest: " + manifest_path);
  }
  if (manifest.value("subcommand", "") != "sweep") {
    uabs::fail(uabs::ErrorCategory::InvalidConfig,
               "report consumes a sweep output directory, got subcommand \"" +
                   manifest.value("subcommand", "") + "\"");
  }
  const std::vector<TradeoffRow> rows =
      parse_tradeoff_tsv(uabs::read_file(tradeoff_path));
  if (rows.empty()) {
    uabs::fail(uabs::ErrorCategory::InvariantViolation, "trade-off table has no rows");
  }

  std::string md = "# Decoding trade-off report\n\n";
  md += "Tool version: " + std::string(uabs::kToolVersion) + " (sweep ran under " +
        manifest.value("tool_version", "unknown") + ")\n\n";
  const json& inputs = manifest.value("inputs", json::object());
  for (const std::string name : {"world", "ensemble"}) {
    if (inputs.contains(name)) {
      md += "- " + name + ": `" + inputs[name].value("path", "") + "` (sha256 `" +
            inputs[name].value("sha256", "") + "`)\n";
    }
  }
  const json& config = manifest.value("config", json::object());
  md += "- decoder: " + config.value("mode", "beam");
  if (config.value("mode", "beam") == "beam") {
    md += ", beam width " + std::to_string(config.value("beam_width", 0));
  }
  md += ", horizon " + std::to_string(config.value("max_len", 0)) + "\n";

  // One section per kind, rows in sweep order.
  std::vector<std::string> kinds;
  for (const TradeoffRow& row : rows) {
    if (std::find(kinds.begin(), kinds.end(), row.kind) == kinds.end()) {
      kinds.push_back(row.kind);
    }
  }
  for (const std::string& kind : kinds) {
    std::vector<const TradeoffRow*> section;
    for (const TradeoffRow& row : rows) {
      if (row.kind == kind) section.push_back(&row);
    }
    md += "\n## Penalty kind: " + kind + "\n\n";
    md += "| lambda | quality | hallucination rate | avg length | generic rate |\n";
    md += "|---|---|---|---|---|\n";
    for (const TradeoffRow* row : section) {
      md += "| " + fmt_short(row->lambda) + " | " + fmt_short(row->quality) + " | " +
            fmt_short(row->rate) + " | " + fmt_short(row->avg_len) + " | " +
            fmt_short(row->generic_rate) + " |\n";
    }
    const TradeoffRow* lo = section.front();
    const TradeoffRow* hi = section.back();
    md += "\nFrom lambda " + fmt_short(lo->lambda) + " to " + fmt_short(hi->lambda) +
          ": hallucination rate " + fmt_short(lo->rate) + " -> " + fmt_short(hi->rate) +
          ", quality " + fmt_short(lo->quality) + " -> " + fmt_short(hi->quality) +
          ", average length " + fmt_short(lo->avg_len) + " -> " +
          fmt_short(hi->avg_len) + ".\n";
  }

  const fs::path out = resolve_out_dir(args.out, args.overwrite);
  uabs::write_file((out / "report.md").string(), md);

  Manifest mf("report", out);
  mf.config() = {{"sweep_dir", args.sweep_dir}};
  mf.input("sweep_manifest", manifest_path);
  mf.input("tradeoff", tradeoff_path);
  mf.output("report.md");
  mf.write();
  std::cout << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware decoding benchmark driver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(uabs::kToolVersion));

  WorldArgs world_args;
  CLI::App* world_cmd = app.add_subcommand("world", "Generate a synthetic world");
  world_cmd->add_option("--seed", world_args.seed, "World generation seed");
  world_cmd->add_option("--config", world_args.config_path,
                        "JSON config file (flags override its fields)");
  CLI::Option* w_vocab =
      world_cmd->add_option("--vocab-size", world_args.cfg.vocab_size);
  CLI::Option* w_function =
      world_cmd->add_option("--function-tokens", world_args.cfg.function_tokens);
  CLI::Option* w_inputs = world_cmd->add_option("--inputs", world_args.cfg.num_inputs);
  CLI::Option* w_order = world_cmd->add_option("--order", world_args.cfg.order);
  CLI::Option* w_grounded =
      world_cmd->add_option("--grounded-fraction", world_args.cfg.grounded_fraction);
  CLI::Option* w_max_len = world_cmd->add_option("--max-len", world_args.cfg.max_len);
  CLI::Option* w_leak = world_cmd->add_option("--leak", world_args.cfg.leak);
  CLI::Option* w_min_support =
      world_cmd->add_option("--min-support", world_args.cfg.min_support);
  CLI::Option* w_max_support =
      world_cmd->add_option("--max-support", world_args.cfg.max_support);
  CLI::Option* w_min_conc =
      world_cmd->add_option("--min-concentration", world_args.cfg.min_concentration);
  CLI::Option* w_max_conc =
      world_cmd->add_option("--max-concentration", world_args.cfg.max_concentration);
  CLI::Option* w_eos_bias = world_cmd->add_option("--eos-bias", world_args.cfg.eos_bias);
  world_cmd->add_option("--out", world_args.out, "Output directory")->required();
  world_cmd->add_flag("--overwrite", world_args.overwrite,
                      "Write into an existing non-empty output directory");

  EnsembleArgs ensemble_args;
  CLI::App* ensemble_cmd =
      app.add_subcommand("ensemble", "Derive perturbed ensemble members");
  ensemble_cmd->add_option("--world", ensemble_args.world_path, "World file")
      ->required();
  ensemble_cmd->add_option("--members", ensemble_args.members, "Ensemble size");
  ensemble_cmd->add_option("--noise", ensemble_args.noise,
                           "Member perturbation scale (0 copies the true model)");
  ensemble_cmd->add_option("--seed", ensemble_args.seed, "Perturbation seed");
  ensemble_cmd->add_option("--out", ensemble_args.out, "Output directory")->required();
  ensemble_cmd->add_flag("--overwrite", ensemble_args.overwrite,
                         "Write into an existing non-empty output directory");

  DecodeArgs decode_args;
  CLI::App* decode_cmd = app.add_subcommand("decode", "Decode inputs to sequences");
  decode_cmd->add_option("--world", decode_args.world_path, "World file")->required();
  decode_cmd->add_option("--ensemble", decode_args.ensemble_path, "Ensemble file")
      ->required();
  decode_cmd->add_option("--mode", decode_args.mode, "beam, exhaustive, or sample");
  decode_cmd->add_option("--beam-width", decode_args.beam_width, "Beam width");
  decode_cmd->add_option("--lambda", decode_args.lambda, "Uncertainty penalty weight");
  decode_cmd->add_option("--kind", decode_args.kind,
                         "Penalized uncertainty: total, aleatoric, or epistemic");
  decode_cmd->add_option("--max-len", decode_args.max_len,
                         "Decode horizon (0: the world's max length)");
  decode_cmd->add_option("--cap", decode_args.cap,
                         "Exhaustive enumeration cap (terminal sequences)");
  decode_cmd->add_option("--seed", decode_args.seed, "Sampling seed (sample mode)");
  decode_cmd->add_flag("--trace", decode_args.trace, "Record per-step traces");
  decode_cmd->add_flag("--strict", decode_args.strict,
                       "Fail if any returned hypothesis is unfinished");
  decode_cmd->add_option("--inputs", decode_args.inputs,
                         "Input ids to decode (default: all)")
      ->delimiter(',');
  decode_cmd->add_option("--out", decode_args.out, "Output directory")->required();
  decode_cmd->add_flag("--overwrite", decode_args.overwrite,
                       "Write into an existing non-empty output directory");

  SweepArgs sweep_args;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Decode a penalty grid and tabulate trade-offs");
  sweep_cmd->add_option("--world", sweep_args.world_path, "World file")->required();
  sweep_cmd->add_option("--ensemble", sweep_args.ensemble_path, "Ensemble file")
      ->required();
  sweep_cmd->add_option("--kinds", sweep_args.kinds,
                        "Uncertainty kinds to sweep (default: all three)")
      ->delimiter(',');
  sweep_cmd->add_option("--lambdas", sweep_args.lambdas,
                        "Penalty weights (default: the per-kind grid)")
      ->delimiter(',');
  sweep_cmd->add_option("--mode", sweep_args.mode, "beam or exhaustive");
  sweep_cmd->add_option("--beam-width", sweep_args.beam_width, "Beam width");
  sweep_cmd->add_option("--max-len", sweep_args.max_len,
                        "Decode horizon (0: the world's max length)");
  sweep_cmd->add_option("--cap", sweep_args.cap, "Exhaustive enumeration cap");
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Grid points decoded in parallel");
  sweep_cmd->add_option("--out", sweep_args.out, "Output directory")->required();
  sweep_cmd->add_flag("--overwrite", sweep_args.overwrite,
                      "Write into an existing non-empty output directory");

  AnalyzeArgs analyze_args;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "Bin tables, correlations, and summary stats");
  analyze_cmd->add_option("--world", analyze_args.world_path, "World file")->required();
  analyze_cmd->add_option("--ensemble", analyze_args.ensemble_path, "Ensemble file")
      ->required();
  analyze_cmd->add_option("--decodes", analyze_args.decodes_path, "Decode records file")
      ->required();
  analyze_cmd->add_option("--edges", analyze_args.edges,
                          "Uncertainty bin edges in nats, strictly ascending")
      ->delimiter(',');
  analyze_cmd->add_option("--out", analyze_args.out, "Output directory")->required();
  analyze_cmd->add_flag("--overwrite", analyze_args.overwrite,
                        "Write into an existing non-empty output directory");

  ReportArgs report_args;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Render a sweep directory as a readable report");
  report_cmd->add_option("--sweep", report_args.sweep_dir, "Sweep output directory")
      ->required();
  report_cmd->add_option("--out", report_args.out, "Output directory")->required();
  report_cmd->add_flag("--overwrite", report_args.overwrite,
                       "Write into an existing non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("InvalidConfig", e.what());
    return 1;
  }

  try {
    if (world_cmd->parsed()) {
      if (!world_args.config_path.empty()) {
        // Config file first, then any flags given on top of it.
        uabs::WorldConfig from_flags = world_args.cfg;
        world_args.cfg = uabs::WorldConfig{};
        apply_config_file(world_args.cfg, world_args.config_path);
        if (w_vocab->count()) world_args.cfg.vocab_size = from_flags.vocab_size;
        if (w_function->count()) {
          world_args.cfg.function_tokens = from_flags.function_tokens;
        }
        if (w_inputs->count()) world_args.cfg.num_inputs = from_flags.num_inputs;
        if (w_order->count()) world_args.cfg.order = from_flags.order;
        if (w_grounded->count()) {
          world_args.cfg.grounded_fraction = from_flags.grounded_fraction;
        }
        if (w_max_len->count()) world_args.cfg.max_len = from_flags.max_len;
        if (w_leak->count()) world_args.cfg.leak = from_flags.leak;
        if (w_min_support->count()) world_args.cfg.min_support = from_flags.min_support;
        if (w_max_support->count()) world_args.cfg.max_support = from_flags.max_support;
        if (w_min_conc->count()) {
          world_args.cfg.min_concentration = from_flags.min_concentration;
        }
        if (w_max_conc->count()) {
          world_args.cfg.max_concentration = from_flags.max_concentration;
        }
        if (w_eos_bias->count()) world_args.cfg.eos_bias = from_flags.eos_bias;
      }
      return run_world(world_args);
    }
    if (ensemble_cmd->parsed()) return run_ensemble(ensemble_args);
    if (decode_cmd->parsed()) return run_decode(decode_args);
    if (sweep_cmd->parsed()) return run_sweep(sweep_args);
    if (analyze_cmd->parsed()) return run_analyze(analyze_args);
    if (report_cmd->parsed()) return run_report(report_args);
    emit_error("InvalidConfig", "no subcommand given");
    return 1;
  } catch (const uabs::Error& err) {
    emit_error(uabs::to_string(err.category()), err.what());
    return 1;
  } catch (const std::exception& ex) {
    emit_error("InvariantViolation", ex.what());
    return 1;
  }
}
