#include "uabs/serialize.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <utility>

#include "uabs/digest.hpp"
#include "uabs/error.hpp"

namespace uabs {

namespace {

using nlohmann::json;  // map-backed: keys serialize sorted, so dumps are canonical

json categorical_to_json(const Categorical& c) {
  json ids = json::array();
  json ps = json::array();
  for (TokenId v = 0; v < c.size(); ++v) {
    if (c[v] > 0.0) {
      ids.push_back(v);
      ps.push_back(c[v]);
    }
  }
  return json{{"ids", std::move(ids)}, {"ps", std::move(ps)}};
}

Categorical categorical_from_json(const json& j, std::size_t vocab_size) {
  if (!j.is_object() || !j.contains("ids") || !j.contains("ps") ||
      !j["ids"].is_array() || !j["ps"].is_array() ||
      j["ids"].size() != j["ps"].size()) {
    fail(ErrorCategory::InvariantViolation, "malformed sparse distribution");
  }
  std::vector<double> probs(vocab_size, 0.0);
  for (std::size_t i = 0; i < j["ids"].size(); ++i) {
    const auto& id = j["ids"][i];
    const auto& p = j["ps"][i];
    if (!id.is_number_unsigned() || !p.is_number()) {
      fail(ErrorCategory::InvariantViolation, "malformed sparse distribution entry");
    }
    const std::uint64_t v = id.get<std::uint64_t>();
    if (v >= vocab_size) {
      fail(ErrorCategory::InvariantViolation, "distribution token id out of vocabulary");
    }
    probs[v] = p.get<double>();
  }
  return Categorical(std::move(probs));
}

json model_to_json(const TabularModel& m) {
  json entries = json::array();
  for (const auto& [key, dist] : m.table()) {
    json e = categorical_to_json(dist);
    e["input"] = key.first;
    e["window"] = key.second;
    entries.push_back(std::move(e));
  }
  return json{{"order", m.order()},
              {"fallback", categorical_to_json(m.fallback())},
              {"entries", std::move(entries)}};
}

TabularModel model_from_json(const json& j, std::size_t vocab_size,
                             std::size_t num_inputs) {
  if (!j.is_object() || !j.contains("order") || !j.contains("fallback") ||
      !j.contains("entries") || !j["order"].is_number_unsigned() ||
      !j["entries"].is_array()) {
    fail(ErrorCategory::InvariantViolation, "malformed model object");
  }
  TabularModel m(j["order"].get<std::size_t>(), vocab_size, num_inputs,
                 categorical_from_json(j["fallback"], vocab_size));
  for (const json& e : j["entries"]) {
    if (!e.is_object() || !e.contains("input") || !e.contains("window") ||
        !e["input"].is_number_unsigned() || !e["window"].is_array()) {
      fail(ErrorCategory::InvariantViolation, "malformed model entry");
    }
    std::vector<TokenId> window;
    for (const json& t : e["window"]) {
      if (!t.is_number_unsigned()) {
        fail(ErrorCategory::InvariantViolation, "malformed window token");
      }
      window.push_back(t.get<TokenId>());
    }
    m.set_entry(e["input"].get<InputId>(), std::move(window),
                categorical_from_json(e, vocab_size));
  }
  return m;
}

json parse_document(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    fail(ErrorCategory::InvariantViolation, "unparseable document");
  }
  return doc;
}

void check_schema(const json& doc, const std::string& expected) {
  if (!doc.is_object() || !doc.contains("schema") || !doc["schema"].is_string()) {
    fail(ErrorCategory::InvariantViolation, "document lacks a schema field");
  }
  const std::string got = doc["schema"].get<std::string>();
  if (got != expected) {
    fail(ErrorCategory::SchemaVersionMismatch,
         "expected schema " + expected + ", found " + got);
  }
}

/// Any failure while rebuilding typed objects from parsed JSON means the
/// file is corrupted; version mismatches keep their own category.
[[noreturn]] void rethrow_as_corruption(const Error& e) {
  if (e.category() == ErrorCategory::SchemaVersionMismatch) throw e;
  fail(ErrorCategory::InvariantViolation, e.what());
}

char tag_char(TokenTag t) {
  switch (t) {
    case TokenTag::Special: return 's';
    case TokenTag::Function: return 'f';
    case TokenTag::Content: return 'c';
  }
  return '?';
}

TokenTag tag_from_char(char c) {
  switch (c) {
    case 's': return TokenTag::Special;
    case 'f': return TokenTag::Function;
    case 'c': return TokenTag::Content;
    default:
      fail(ErrorCategory::InvariantViolation, std::string("unknown token tag: ") + c);
  }
}

}  // namespace

std::string world_to_json(const WorldSpec& w) {
  std::string tags;
  for (const TokenTag t : w.vocab.tags()) tags += tag_char(t);
  json doc{{"schema", kWorldSchema},
           {"seed", w.seed},
           {"leak", w.leak},
           {"max_len", w.max_len},
           {"vocab", json{{"tokens", w.vocab.tokens()}, {"tags", tags}}},
           {"grounded", w.grounded},
           {"model", model_to_json(w.true_model)}};
  return doc.dump() + "\n";
}

WorldSpec world_from_json(const std::string& text) {
  const json doc = parse_document(text);
  check_schema(doc, kWorldSchema);
  try {
    for (const char* field : {"seed", "leak", "max_len", "vocab", "grounded", "model"}) {
      if (!doc.contains(field)) {
        fail(ErrorCategory::InvariantViolation, std::string("missing field: ") + field);
      }
    }
    const json& jv = doc["vocab"];
    if (!jv.is_object() || !jv.contains("tokens") || !jv.contains("tags") ||
        !jv["tokens"].is_array() || !jv["tags"].is_string()) {
      fail(ErrorCategory::InvariantViolation, "malformed vocab object");
    }
    std::vector<std::string> tokens = jv["tokens"].get<std::vector<std::string>>();
    std::vector<TokenTag> tags;
    for (const char c : jv["tags"].get<std::string>()) tags.push_back(tag_from_char(c));
    Vocab vocab(std::move(tokens), std::move(tags));

    std::vector<std::vector<TokenId>> grounded =
        doc["grounded"].get<std::vector<std::vector<TokenId>>>();
    if (grounded.empty()) {
      fail(ErrorCategory::InvariantViolation, "world without inputs");
    }

    TabularModel model = model_from_json(doc["model"], vocab.size(), grounded.size());
    WorldSpec world{std::move(vocab),
                    std::move(grounded),
                    std::move(model),
                    doc["leak"].get<double>(),
                    doc["seed"].get<std::uint64_t>(),
                    doc["max_len"].get<std::size_t>()};
    validate_world(world);
    return world;
  } catch (const Error& e) {
    rethrow_as_corruption(e);
  } catch (const json::exception& e) {
    fail(ErrorCategory::InvariantViolation, std::string("malformed document: ") + e.what());
  }
}

std::string ensemble_to_json(const EnsembleModel& e) {
  if (e.members.empty()) {
    fail(ErrorCategory::InvariantViolation, "ensemble with zero members");
  }
  const TabularModel& first = e.members.front();
  json members = json::array();
  for (const TabularModel& m : e.members) {
    if (m.order() != first.order() || m.vocab_size() != first.vocab_size() ||
        m.num_inputs() != first.num_inputs()) {
      fail(ErrorCategory::ShapeMismatch, "ensemble members disagree on shape");
    }
    members.push_back(model_to_json(m));
  }
  json doc{{"schema", kEnsembleSchema},
           {"world_digest", e.world_digest},
           {"vocab_size", first.vocab_size()},
           {"num_inputs", first.num_inputs()},
           {"members", std::move(members)}};
  return doc.dump() + "\n";
}

EnsembleModel ensemble_from_json(const std::string& text) {
  const json doc = parse_document(text);
  check_schema(doc, kEnsembleSchema);
  try {
    for (const char* field : {"world_digest", "vocab_size", "num_inputs", "members"}) {
      if (!doc.contains(field)) {
        fail(ErrorCategory::InvariantViolation, std::string("missing field: ") + field);
      }
    }
    if (!doc["members"].is_array() || doc["members"].empty()) {
      fail(ErrorCategory::InvariantViolation, "ensemble without members");
    }
    const std::size_t vocab_size = doc["vocab_size"].get<std::size_t>();
    const std::size_t num_inputs = doc["num_inputs"].get<std::size_t>();
    EnsembleModel out;
    out.world_digest = doc["world_digest"].get<std::string>();
    for (const json& jm : doc["members"]) {
      out.members.push_back(model_from_json(jm, vocab_size, num_inputs));
      if (out.members.back().order() != out.members.front().order()) {
        fail(ErrorCategory::InvariantViolation, "members disagree on order");
      }
    }
    return out;
  } catch (const Error& e) {
    rethrow_as_corruption(e);
  } catch (const json::exception& e) {
    fail(ErrorCategory::InvariantViolation, std::string("malformed document: ") + e.what());
  }
}

std::string world_digest(const WorldSpec& w) { return sha256_hex(world_to_json(w)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorCategory::Io, "read failure on " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
  out << content;
  out.flush();
  if (!out) fail(ErrorCategory::Io, "write failure on " + path);
}

void save_world(const WorldSpec& w, const std::string& path) {
  write_file(path, world_to_json(w));
}

WorldSpec load_world(const std::string& path) { return world_from_json(read_file(path)); }

void save_ensemble(const EnsembleModel& e, const std::string& path) {
  write_file(path, ensemble_to_json(e));
}

EnsembleModel load_ensemble(const std::string& path) {
  return ensemble_from_json(read_file(path));
}

}  // namespace uabs
