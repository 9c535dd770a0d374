#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "musekit/music.hpp"

namespace musekit {

/// Per-song facts feeding the corpus statistics reports: length in three
/// units, the first tempo and the first key signature.
struct SongRecord {
    std::string path;
    Tick length_ticks = 0;
    double length_quarters = 0.0;
    double length_seconds = 0.0;
    std::optional<double> initial_qpm;
    std::optional<KeySignature> initial_key;
};

struct StatCorpus {
    std::vector<SongRecord> records;
    std::vector<std::pair<std::string, std::string>> failures;  // path, error
};

/// Walks a directory recursively, reading every file whose extension names
/// a supported format (.mid/.midi, .xml/.musicxml, .mxl, .abc,
/// .muspy.json). Parse failures become failure entries, not errors.
StatCorpus collect_stats(const std::filesystem::path& directory, unsigned workers = 4);

struct Histogram {
    std::vector<double> edges;          // bins + 1, explicit
    std::vector<std::int64_t> counts;   // per bin

    static Histogram build(const std::vector<double>& values, std::size_t bins);
};

enum class StatReportKind { lengths, tempos, keys };

StatReportKind stat_report_kind(std::string_view name);

/// Writes `<prefix>.csv` (records) and `<prefix>_hist.csv` (histograms;
/// key counts sorted by descending frequency over the 24 categories) and
/// returns a JSON summary.
std::string write_stat_report(const StatCorpus& corpus, StatReportKind kind,
                              const std::filesystem::path& prefix);

}  // namespace musekit
