#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "musekit/music.hpp"

namespace musekit {

/// Canonical text extension: `<name>.muspy.json`.
inline constexpr const char* kCanonicalExtension = ".muspy.json";

/// Serializes to the canonical document: UTF-8 JSON, keys in declaration
/// order, event lists sorted, absent optionals omitted, 2-space indent,
/// LF endings. Deterministic byte-for-byte. Throws ValidationError on
/// invalid input.
std::string save(const Music& music);

/// Inverse of save. Strict: unknown keys are rejected with their path,
/// a schema_version other than the library's is a version error, and the
/// resulting Music must validate.
Music load(std::string_view text);

void save_file(const Music& music, const std::filesystem::path& path);
Music load_file(const std::filesystem::path& path);

}  // namespace musekit
