// Python bindings for the core operations: world construction, ensemble
// perturbation, uncertainty decomposition, the decoders, and the analysis
// metrics. Heavy calls release the GIL; they never re-enter Python.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uabs/analysis.hpp"
#include "uabs/decode.hpp"
#include "uabs/ensemble.hpp"
#include "uabs/error.hpp"
#include "uabs/prob.hpp"
#include "uabs/serialize.hpp"
#include "uabs/world.hpp"

namespace py = pybind11;
using namespace uabs;

namespace {

EnsembleDistribution to_members(const std::vector<std::vector<double>>& rows) {
  EnsembleDistribution members;
  members.reserve(rows.size());
  for (const auto& row : rows) members.emplace_back(row);
  return members;
}

}  // namespace

PYBIND11_MODULE(uabs, m) {
  m.doc() = "Ensemble uncertainty decomposition and uncertainty-aware beam search "
            "over synthetic grounded worlds";

  py::register_exception<Error>(m, "Error");

  py::enum_<UncertaintyKind>(m, "UncertaintyKind")
      .value("Total", UncertaintyKind::Total)
      .value("Aleatoric", UncertaintyKind::Aleatoric)
      .value("Epistemic", UncertaintyKind::Epistemic);

  py::class_<UncertaintyBreakdown>(m, "UncertaintyBreakdown")
      .def(py::init<>())
      .def_readonly("aleatoric", &UncertaintyBreakdown::aleatoric)
      .def_readonly("epistemic", &UncertaintyBreakdown::epistemic)
      .def_property_readonly("total", &UncertaintyBreakdown::total)
      .def("__repr__", [](const UncertaintyBreakdown& b) {
        return "UncertaintyBreakdown(aleatoric=" + std::to_string(b.aleatoric) +
               ", epistemic=" + std::to_string(b.epistemic) + ")";
      });

  m.def(
      "decompose",
      [](const std::vector<std::vector<double>>& members) {
        return decompose(to_members(members));
      },
      py::arg("members"),
      "Uncertainty decomposition of an equal-weight ensemble of probability "
      "vectors: aleatoric is the mean member entropy, epistemic the aggregate "
      "entropy minus it.");
  m.def(
      "aggregate",
      [](const std::vector<std::vector<double>>& members) {
        return aggregate(to_members(members)).probs();
      },
      py::arg("members"), "Equal-weight mixture of the member distributions.");
  m.def(
      "entropy",
      [](const std::vector<double>& probs) { return Categorical(probs).entropy(); },
      py::arg("probs"), "Shannon entropy in nats, validating the input.");

  py::class_<WorldConfig>(m, "WorldConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &WorldConfig::vocab_size)
      .def_readwrite("function_tokens", &WorldConfig::function_tokens)
      .def_readwrite("num_inputs", &WorldConfig::num_inputs)
      .def_readwrite("order", &WorldConfig::order)
      .def_readwrite("grounded_fraction", &WorldConfig::grounded_fraction)
      .def_readwrite("max_len", &WorldConfig::max_len)
      .def_readwrite("leak", &WorldConfig::leak)
      .def_readwrite("min_support", &WorldConfig::min_support)
      .def_readwrite("max_support", &WorldConfig::max_support)
      .def_readwrite("min_concentration", &WorldConfig::min_concentration)
      .def_readwrite("max_concentration", &WorldConfig::max_concentration)
      .def_readwrite("eos_bias", &WorldConfig::eos_bias)
      .def("validate", &WorldConfig::validate);

  py::class_<WorldSpec>(m, "WorldSpec")
      .def_property_readonly("num_inputs", &WorldSpec::num_inputs)
      .def_readonly("max_len", &WorldSpec::max_len)
      .def_readonly("seed", &WorldSpec::seed)
      .def_readonly("leak", &WorldSpec::leak)
      .def_property_readonly("grounded",
                             [](const WorldSpec& w) { return w.grounded; })
      .def_property_readonly("vocab_tokens",
                             [](const WorldSpec& w) { return w.vocab.tokens(); })
      .def("hallucination_set",
           [](const WorldSpec& w, InputId input) {
             return hallucination_set(w, Context{input, {}});
           },
           py::arg("input"),
           "Content tokens that are false information for this input.")
      .def("detokenize",
           [](const WorldSpec& w, const std::vector<TokenId>& tokens) {
             return detokenize(w.vocab, tokens);
           },
           py::arg("tokens"));

  py::class_<EnsembleModel>(m, "EnsembleModel")
      .def_property_readonly("size", &EnsembleModel::size)
      .def_readonly("world_digest", &EnsembleModel::world_digest);

  m.def("generate_world", &generate_world, py::arg("config"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "Deterministically builds a synthetic grounded world.");
  m.def("perturb_members", &perturb_members, py::arg("world"), py::arg("members"),
        py::arg("noise"), py::arg("seed"), py::call_guard<py::gil_scoped_release>(),
        "Derives ensemble members from the true model: jitter on supported "
        "tokens plus bounded mass leaked onto hallucinated ones.");
  m.def("validate_world", &validate_world, py::arg("world"));
  m.def("world_digest", &world_digest, py::arg("world"));

  py::class_<Hypothesis>(m, "Hypothesis")
      .def_readonly("tokens", &Hypothesis::tokens)
      .def_readonly("cum_logp", &Hypothesis::cum_logp)
      .def_readonly("cum_unc", &Hypothesis::cum_unc)
      .def_readonly("finished", &Hypothesis::finished)
      .def("objective", &Hypothesis::objective, py::arg("lambda_"), py::arg("kind"))
      .def("__repr__", [](const Hypothesis& h) {
        std::string s = "Hypothesis(tokens=[";
        for (std::size_t i = 0; i < h.tokens.size(); ++i) {
          if (i) s += ", ";
          s += std::to_string(h.tokens[i]);
        }
        s += "], cum_logp=" + std::to_string(h.cum_logp) + ")";
        return s;
      });

  py::class_<DecodeConfig>(m, "DecodeConfig")
      .def(py::init<>())
      .def_readwrite("beam_width", &DecodeConfig::beam_width)
      .def_readwrite("lambda_", &DecodeConfig::lambda)
      .def_readwrite("kind", &DecodeConfig::kind)
      .def_readwrite("max_len", &DecodeConfig::max_len)
      .def_readwrite("length_normalize_quality", &DecodeConfig::length_normalize_quality)
      .def_readwrite("strict", &DecodeConfig::strict);

  m.def("beam_search", &beam_search, py::arg("ensemble"), py::arg("input"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>(),
        "Plain beam search ranked by cumulative log-probability.");
  m.def("uabs", &uabs::uabs, py::arg("ensemble"), py::arg("input"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>(),
        "Uncertainty-aware beam search: objective cum_logp - lambda * cum_unc[kind].");
  m.def("exhaustive_decode", &exhaustive_decode, py::arg("ensemble"), py::arg("input"),
        py::arg("lambda_"), py::arg("kind"), py::arg("max_len"),
        py::arg("cap") = std::size_t{1000000},
        py::call_guard<py::gil_scoped_release>(),
        "Global argmax of the penalized objective by exhaustive enumeration.");
  m.def("sample", &sample, py::arg("ensemble"), py::arg("input"), py::arg("seed"),
        py::arg("max_len"), py::call_guard<py::gil_scoped_release>(),
        "Ancestral sampling from the aggregated distribution.");

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("token", &StepRecord::token)
      .def_readonly("logp", &StepRecord::logp)
      .def_readonly("breakdown", &StepRecord::breakdown);

  m.def("replay", &replay, py::arg("ensemble"), py::arg("input"), py::arg("tokens"),
        py::call_guard<py::gil_scoped_release>(),
        "Per-step trace of an existing token sequence under the ensemble.");
  m.def(
      "step_scores",
      [](const EnsembleModel& e, InputId input, const std::vector<TokenId>& prefix) {
        const auto [agg, breakdown] = step_scores(e, Context{input, prefix});
        return py::make_tuple(agg.probs(), breakdown);
      },
      py::arg("ensemble"), py::arg("input"), py::arg("prefix"),
      "Aggregated next-token probabilities and their decomposition at a context.");

  py::class_<DecodedOutput>(m, "DecodedOutput")
      .def(py::init([](InputId input, const Hypothesis& hyp) {
             DecodedOutput o;
             o.input = input;
             o.hyp = hyp;
             return o;
           }),
           py::arg("input"), py::arg("hyp"))
      .def_readonly("input", &DecodedOutput::input)
      .def_readonly("hyp", &DecodedOutput::hyp);

  py::class_<LabeledPrediction>(m, "LabeledPrediction")
      .def_readonly("token", &LabeledPrediction::token)
      .def_readonly("breakdown", &LabeledPrediction::breakdown)
      .def_readonly("hallucinated", &LabeledPrediction::hallucinated);

  m.def("label_outputs", &label_outputs, py::arg("world"), py::arg("ensemble"),
        py::arg("outputs"), py::call_guard<py::gil_scoped_release>(),
        "One labeled record per content-token occurrence, with exact "
        "hallucination flags from the world's grounding.");
  m.def(
      "hallucination_probability",
      [](const std::vector<double>& probs, const std::vector<TokenId>& hset) {
        return hallucination_probability(Categorical(probs), hset);
      },
      py::arg("probs"), py::arg("hallucination_set"),
      "Probability mass the distribution puts on the given token set.");

  py::class_<BinRow>(m, "BinRow")
      .def_readonly("count", &BinRow::count)
      .def_readonly("hallucinated", &BinRow::hallucinated)
      .def_readonly("defined", &BinRow::defined)
      .def_readonly("rate", &BinRow::rate);

  py::class_<BinTable>(m, "BinTable")
      .def_readonly("edges", &BinTable::edges)
      .def_readonly("bins", &BinTable::bins);

  m.def("bin_rates", &bin_rates, py::arg("predictions"), py::arg("edges"),
        py::arg("kind"), "Hallucination rate per uncertainty bin.");
  m.attr("DEFAULT_BIN_EDGES") = kDefaultBinEdges;

  m.def(
      "pearson",
      [](const std::vector<double>& xs, const std::vector<double>& ys) {
        return pearson(xs, ys);
      },
      py::arg("xs"), py::arg("ys"),
      "Pearson correlation; booleans enter as 0/1 (point-biserial).");
  m.def("spearman", &spearman, py::arg("xs"), py::arg("ys"),
        "Spearman rank correlation with average ranks on ties.");

  py::class_<RateResult>(m, "RateResult")
      .def_readonly("rate", &RateResult::rate)
      .def_readonly("hallucinated", &RateResult::hallucinated)
      .def_readonly("mentions", &RateResult::mentions)
      .def_readonly("defined", &RateResult::defined);

  m.def("hallucination_rate", &hallucination_rate, py::arg("outputs"), py::arg("world"),
        "Hallucinated content-token occurrences over all content-token occurrences.");

  py::class_<SummaryStats>(m, "SummaryStats")
      .def_readonly("avg_len", &SummaryStats::avg_len)
      .def_readonly("mention_count", &SummaryStats::mention_count)
      .def_readonly("generic_rate", &SummaryStats::generic_rate);

  m.def("summary_stats", &summary_stats, py::arg("outputs"), py::arg("world"));
  m.def("quality_proxy", &quality_proxy, py::arg("world"), py::arg("outputs"),
        "Mean per-output log-likelihood under the world's true model, smoothed.");

  py::class_<SweepPoint>(m, "SweepPoint")
      .def(py::init([](UncertaintyKind kind, double lambda) {
             return SweepPoint{kind, lambda};
           }),
           py::arg("kind"), py::arg("lambda_"))
      .def_readwrite("kind", &SweepPoint::kind)
      .def_readwrite("lambda_", &SweepPoint::lambda);

  py::class_<SweepOptions>(m, "SweepOptions")
      .def(py::init<>())
      .def_readwrite("beam_width", &SweepOptions::beam_width)
      .def_readwrite("exhaustive", &SweepOptions::exhaustive)
      .def_readwrite("max_len", &SweepOptions::max_len)
      .def_readwrite("jobs", &SweepOptions::jobs)
      .def_readwrite("cap", &SweepOptions::cap);

  py::class_<TradeoffRecord>(m, "TradeoffRecord")
      .def_readonly("kind", &TradeoffRecord::kind)
      .def_readonly("lambda_", &TradeoffRecord::lambda)
      .def_readonly("quality", &TradeoffRecord::quality)
      .def_readonly("hallucination_rate", &TradeoffRecord::hallucination_rate)
      .def_readonly("avg_len", &TradeoffRecord::avg_len)
      .def_readonly("mention_count", &TradeoffRecord::mention_count)
      .def_readonly("generic_rate", &TradeoffRecord::generic_rate);

  m.def("default_lambda_grid", &default_lambda_grid, py::arg("kind"));
  m.def("sweep", &sweep, py::arg("world"), py::arg("ensemble"), py::arg("grid"),
        py::arg("options"), py::call_guard<py::gil_scoped_release>(),
        "Decodes every input at every grid point and reports trade-off metrics.");

  m.def("save_world", &save_world, py::arg("world"), py::arg("path"));
  m.def("load_world", &load_world, py::arg("path"));
  m.def("save_ensemble", &save_ensemble, py::arg("ensemble"), py::arg("path"));
  m.def("load_ensemble", &load_ensemble, py::arg("path"));
  m.def("world_to_json", &world_to_json, py::arg("world"));
  m.def("world_from_json", &world_from_json, py::arg("text"));
  m.def("ensemble_to_json", &ensemble_to_json, py::arg("ensemble"));
  m.def("ensemble_from_json", &ensemble_from_json, py::arg("text"));
}
