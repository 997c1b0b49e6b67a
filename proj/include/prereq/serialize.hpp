#pragma once

#include "prereq/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace prereq {

using Json = nlohmann::json;

/// Checkpoint container version. Bumped whenever a stored field changes meaning.
inline constexpr int kCheckpointVersion = 1;

/// Row-major {"rows":r,"cols":c,"data":[...]} encoding. Doubles are written with
/// round-trip precision so save -> load is lossless.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

/// Wraps a payload as {"format":kind,"version":N,"payload":...}.
Json make_checkpoint(std::string_view kind, Json payload);
/// Validates kind/version and returns the payload; throws Error on mismatch.
const Json& open_checkpoint(const Json& container, std::string_view kind);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j, int indent = -1);

}  // namespace prereq
