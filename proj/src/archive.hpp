#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace musekit::archive {

using Bytes = std::vector<std::uint8_t>;

struct ZipEntry {
    std::string name;
    Bytes data;
};

/// Reads a ZIP archive (stored and deflated entries; no zip64). CRCs are
/// verified. Throws Error(errc::archive) on anything that is not a
/// well-formed archive.
std::vector<ZipEntry> read_zip(const Bytes& bytes);

/// Finds one entry by exact name; nullptr when absent.
const ZipEntry* find_entry(const std::vector<ZipEntry>& entries, std::string_view name);

/// Writes a stored (uncompressed) ZIP; enough for fixtures and containers.
Bytes write_zip_stored(const std::vector<ZipEntry>& entries);

/// gzip/zlib-wrapped decompression of a whole buffer.
Bytes gunzip(const Bytes& bytes);

/// Extracts a .tar (already decompressed) or .tar.gz / archive into
/// `dest`. Entry paths are sanitized (no absolute paths, no "..").
/// Returns the number of files written.
std::size_t extract_tar(const Bytes& bytes, const std::filesystem::path& dest);
std::size_t extract_tar_gz(const Bytes& bytes, const std::filesystem::path& dest);
std::size_t extract_zip(const Bytes& bytes, const std::filesystem::path& dest);

}  // namespace musekit::archive
