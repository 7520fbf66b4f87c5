#pragma once

#include <filesystem>

#include "lerp/trainer.hpp"

namespace lerp {

// Line-oriented text checkpoint:
//
//   lerp-checkpoint 1
//   config <single-line JSON, same keys as the config file>
//   fingerprint <16 hex digits of the training graph fingerprint>
//   relations <count>
//   <relation name>                       (one line each, id order)
//   params <count>
//   param <name> <rows> <cols>
//   <rows*cols values, row-major, %.17g, space separated>
//   ...
//   end
//
// Values round-trip exactly. Files are written to a temporary sibling and
// renamed into place.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

// Writes `contents` to a temporary file next to `path` and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace lerp
