#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "musekit/music.hpp"

namespace musekit {

enum class ArchiveKind { none, zip, tar_gz };

struct ManifestSource {
    std::string url;
    std::optional<std::string> sha256;  // unpinned sources skip verification
    ArchiveKind archive = ArchiveKind::none;
    std::optional<std::string> filename;  // local name; basename of url otherwise

    std::string local_name() const;
};

struct PreprocessFlags {
    bool discard_repeats = false;
    bool melody_only = false;
};

/// Declarative description of a remote corpus; these live as JSON files
/// under manifests/ (one per supported dataset).
struct DatasetManifest {
    std::string name;
    std::vector<ManifestSource> sources;
    std::string file_glob;
    std::string source_format;  // midi | musicxml | mxl | abc | muspy
    std::string license_note;
    PreprocessFlags preprocess;
    std::map<std::string, std::string> annotations;
    bool unverified = false;

    static DatasetManifest from_json(std::string_view text);
    static DatasetManifest load_file(const std::filesystem::path& path);
    std::string to_json() const;
};

enum class CorpusMode { on_the_fly, preconverted };

/// A manifest bound to a directory: `<root>/raw/` holds source files,
/// `<root>/converted/` canonical documents, `<root>/.converted.json` the
/// conversion marker.
struct CorpusHandle {
    std::filesystem::path root;
    CorpusMode mode = CorpusMode::on_the_fly;
    DatasetManifest manifest;
};

struct DownloadReport {
    std::vector<std::string> fetched;
    std::vector<std::string> verified_skips;
    std::vector<std::string> unverified;
    std::uint64_t bytes_transferred = 0;
    std::size_t files_extracted = 0;

    std::string to_json() const;
};

/// Fetches and verifies every source, extracting archives into raw/.
/// Idempotent: sources whose files already verify are not refetched and
/// archives already extracted (by checksum) are not re-extracted.
DownloadReport download(const DatasetManifest& manifest,
                        const std::filesystem::path& root);

struct ConvertReport {
    std::size_t matched = 0;
    std::size_t converted = 0;
    std::size_t skipped_unparseable = 0;
    std::size_t skipped_unchanged = 0;

    std::string to_json() const;
};

/// Parses every glob-matched file under raw/ and saves it as canonical
/// `<relative path>.muspy.json` under converted/, recording per-file source
/// hashes in the marker. Incremental: unchanged files are not reconverted.
/// `workers` bounds the conversion pool.
ConvertReport convert(const CorpusHandle& handle, unsigned workers = 4);

struct CorpusItem {
    std::string path;  // raw-relative path (corpus identity in both modes)
    std::optional<Music> music;
    std::string error;

    bool ok() const { return music.has_value(); }
};

/// Single-consumer stream over a corpus in lexicographic path order.
/// On-the-fly parses source files lazily; preconverted loads canonical
/// documents (and replays conversion-time failures as error items), so
/// both modes yield identical sequences.
class CorpusIterator {
public:
    explicit CorpusIterator(const CorpusHandle& handle);

    std::size_t size() const { return keys_.size(); }
    const std::vector<std::string>& keys() const { return keys_; }
    std::optional<CorpusItem> next();
    CorpusItem load(std::size_t index) const;

private:
    CorpusHandle handle_;
    std::vector<std::string> keys_;
    std::map<std::string, std::pair<std::string, std::string>> marker_;  // path -> (status, error)
    std::size_t cursor_ = 0;
};

std::vector<CorpusItem> iterate_all(const CorpusHandle& handle);

struct DatasetSplit {
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{8, 1, 1};
    std::array<std::vector<std::string>, 3> parts;  // train, valid, test

    static const char* part_name(std::size_t index);
    static DatasetSplit from_json(std::string_view text);
    std::string to_json() const;
};

/// Seeded shuffle then contiguous partition with largest-remainder
/// rounding. Same seed, same member lists.
DatasetSplit split(const CorpusHandle& handle, std::array<double, 3> ratios,
                   std::uint64_t seed);

/// Deterministic (corpus, file) index pairs: corpus uniform, then file
/// uniform within it. Every handle must be non-empty.
std::vector<std::pair<std::size_t, std::size_t>> stratified_draws(
    const std::vector<CorpusHandle>& handles, std::uint64_t seed, std::size_t count);

/// Stream of `count` Music values drawn per stratified_draws.
class StratifiedSampler {
public:
    StratifiedSampler(std::vector<CorpusHandle> handles, std::uint64_t seed,
                      std::size_t count);

    std::optional<CorpusItem> next();

private:
    std::vector<CorpusIterator> views_;
    std::vector<std::pair<std::size_t, std::size_t>> draws_;
    std::size_t cursor_ = 0;
};

}  // namespace musekit
