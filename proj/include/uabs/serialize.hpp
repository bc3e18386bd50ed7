#pragma once

#include <string>

#include "uabs/world.hpp"

namespace uabs {

inline constexpr char kWorldSchema[] = "uabs.world/1";
inline constexpr char kEnsembleSchema[] = "uabs.ensemble/1";
inline constexpr char kDecodesSchema[] = "uabs.decodes/1";
inline constexpr char kManifestSchema[] = "uabs.manifest/1";

/// Canonical world serialization: JSON with sorted keys, table entries in
/// (input, window) order, probabilities stored sparsely with shortest
/// round-trip decimals. Byte-deterministic for equal worlds.
std::string world_to_json(const WorldSpec& w);

/// Parses and fully validates a serialized world.
/// Throws SchemaVersionMismatch on a foreign schema string, and
/// InvariantViolation on corrupted content (unparseable document, missing
/// fields, invalid distributions, broken world invariants).
WorldSpec world_from_json(const std::string& text);

/// Canonical ensemble serialization, same conventions as worlds.
std::string ensemble_to_json(const EnsembleModel& e);
EnsembleModel ensemble_from_json(const std::string& text);

/// Digest of the canonical serialization; identifies a world independently
/// of where its file lives.
std::string world_digest(const WorldSpec& w);

void save_world(const WorldSpec& w, const std::string& path);
WorldSpec load_world(const std::string& path);
void save_ensemble(const EnsembleModel& e, const std::string& path);
EnsembleModel load_ensemble(const std::string& path);

/// Whole-file read/write helpers. Throw IO.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace uabs
