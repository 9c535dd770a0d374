#include "musekit/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "musekit/abc_io.hpp"
#include "musekit/midi_io.hpp"
#include "musekit/musicxml_io.hpp"
#include "musekit/serialization.hpp"
#include "parallel.hpp"

namespace musekit {

namespace {

const char* kRootNames[] = {"C", "C#", "D", "D#", "E", "F",
                            "F#", "G", "G#", "A", "A#", "B"};

std::string key_name(const KeySignature& key) {
    return std::string(kRootNames[key.root]) + " " + mode_name(key.mode);
}

std::optional<Music> read_by_extension(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    auto ends_with = [&](std::string_view suffix) {
        return name.size() >= suffix.size() &&
               name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".mid") || ends_with(".midi")) return read_midi_file(path);
    if (ends_with(".xml") || ends_with(".musicxml")) return read_musicxml_file(path);
    if (ends_with(".mxl")) return read_mxl_file(path);
    if (ends_with(".muspy.json")) return load_file(path);
    if (ends_with(".abc")) {
        auto tunes = read_abc_file(path);
        if (tunes.empty()) throw Error(errc::schema, "no tunes in " + path.string());
        return tunes.front();
    }
    return std::nullopt;  // not a music file
}

SongRecord record_of(const Music& music, const std::string& path) {
    SongRecord record;
    record.path = path;
    record.length_ticks = end_time(music);
    record.length_quarters = double(record.length_ticks) / music.resolution;
    record.length_seconds = duration_seconds(music);
    if (!music.tempos.empty()) record.initial_qpm = music.tempos.front().qpm;
    if (!music.key_signatures.empty()) record.initial_key = music.key_signatures.front();
    return record;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string format_number(double value) {
    char buffer[48];
    std::snprintf(buffer, sizeof buffer, "%.6f", value);
    return buffer;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error(errc::io, "failed writing " + path.string());
}

}  // namespace

StatCorpus collect_stats(const std::filesystem::path& directory, unsigned workers) {
    if (!std::filesystem::is_directory(directory))
        throw Error(errc::io, directory.string() + " is not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(directory))
        if (entry.is_regular_file())
            paths.push_back(entry.path().lexically_relative(directory).generic_string());
    std::sort(paths.begin(), paths.end());

    struct Slot {
        std::optional<SongRecord> record;
        std::string error;
        bool relevant = false;
    };
    std::vector<Slot> slots(paths.size());
    parallel_for(paths.size(), workers, [&](std::size_t i) {
        try {
            auto music = read_by_extension(directory / paths[i]);
            if (!music) return;
            slots[i].relevant = true;
            slots[i].record = record_of(*music, paths[i]);
        } catch (const Error& e) {
            slots[i].relevant = true;
            slots[i].error = e.what();
        }
    });

    StatCorpus corpus;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!slots[i].relevant) continue;
        if (slots[i].record) corpus.records.push_back(std::move(*slots[i].record));
        else corpus.failures.emplace_back(paths[i], slots[i].error);
    }
    return corpus;
}

Histogram Histogram::build(const std::vector<double>& values, std::size_t bins) {
    Histogram histogram;
    if (bins == 0) bins = 1;
    double top = 0.0;
    for (double v : values) top = std::max(top, v);
    if (top <= 0.0) top = 1.0;
    for (std::size_t i = 0; i <= bins; ++i)
        histogram.edges.push_back(top * double(i) / double(bins));
    histogram.counts.assign(bins, 0);
    for (double v : values) {
        auto bin = std::size_t(double(bins) * v / top);
        if (bin >= bins) bin = bins - 1;  // the maximum lands in the last bin
        ++histogram.counts[bin];
    }
    return histogram;
}

StatReportKind stat_report_kind(std::string_view name) {
    if (name == "lengths") return StatReportKind::lengths;
    if (name == "tempos") return StatReportKind::tempos;
    if (name == "keys") return StatReportKind::keys;
    throw Error(errc::invalid_argument,
                "unknown report \"" + std::string(name) + "\" (lengths|tempos|keys)");
}

std::string write_stat_report(const StatCorpus& corpus, StatReportKind kind,
                              const std::filesystem::path& prefix) {
    if (corpus.records.empty() && corpus.failures.empty())
        throw Error(errc::config, "no music files found");

    std::ostringstream records;
    std::ostringstream hist;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    summary["songs"] = corpus.records.size();
    summary["failed"] = corpus.failures.size();

    constexpr std::size_t kBins = 20;
    switch (kind) {
        case StatReportKind::lengths: {
            records << "path,ticks,quarters,seconds\n";
            std::vector<double> ticks, quarters, seconds;
            for (const auto& r : corpus.records) {
                records << csv_quote(r.path) << "," << r.length_ticks << ","
                        << format_number(r.length_quarters) << ","
                        << format_number(r.length_seconds) << "\n";
                ticks.push_back(double(r.length_ticks));
                quarters.push_back(r.length_quarters);
                seconds.push_back(r.length_seconds);
            }
            hist << "unit,bin_low,bin_high,count\n";
            const char* units[] = {"ticks", "quarters", "seconds"};
            const std::vector<double>* series[] = {&ticks, &quarters, &seconds};
            for (int u = 0; u < 3; ++u) {
                Histogram h = Histogram::build(*series[u], kBins);
                for (std::size_t b = 0; b < h.counts.size(); ++b)
                    hist << units[u] << "," << format_number(h.edges[b]) << ","
                         << format_number(h.edges[b + 1]) << "," << h.counts[b] << "\n";
            }
            break;
        }
        case StatReportKind::tempos: {
            records << "path,initial_qpm\n";
            std::vector<double> tempos;
            std::size_t without = 0;
            for (const auto& r : corpus.records) {
                records << csv_quote(r.path) << ",";
                if (r.initial_qpm) {
                    records << format_number(*r.initial_qpm);
                    tempos.push_back(*r.initial_qpm);
                } else {
                    ++without;
                }
                records << "\n";
            }
            hist << "bin_low,bin_high,count\n";
            Histogram h = Histogram::build(tempos, kBins);
            for (std::size_t b = 0; b < h.counts.size(); ++b)
                hist << format_number(h.edges[b]) << "," << format_number(h.edges[b + 1])
                     << "," << h.counts[b] << "\n";
            summary["with_tempo"] = tempos.size();
            summary["without_tempo"] = without;
            break;
        }
        case StatReportKind::keys: {
            records << "path,initial_key\n";
            std::array<std::int64_t, 24> counts{};
            std::size_t without = 0;
            for (const auto& r : corpus.records) {
                records << csv_quote(r.path) << ",";
                if (r.initial_key) {
                    records << key_name(*r.initial_key);
                    std::size_t index = std::size_t(r.initial_key->root) +
                                        (r.initial_key->mode == Mode::minor ? 12 : 0);
                    ++counts[index];
                } else {
                    ++without;
                }
                records << "\n";
            }
            // the 24 categories sorted by descending count, ties in category order
            std::vector<std::size_t> order(24);
            for (std::size_t i = 0; i < 24; ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return counts[a] > counts[b];
            });
            hist << "key,count\n";
            for (std::size_t index : order) {
                KeySignature key{0, int(index % 12),
                                 index >= 12 ? Mode::minor : Mode::major};
                hist << key_name(key) << "," << counts[index] << "\n";
            }
            summary["with_key"] = corpus.records.size() - without;
            summary["without_key"] = without;
            break;
        }
    }

    std::filesystem::path records_path = prefix;
    records_path += ".csv";
    std::filesystem::path hist_path = prefix;
    hist_path += "_hist.csv";
    write_text_file(records_path, records.str());
    write_text_file(hist_path, hist.str());

    summary["records_csv"] = records_path.string();
    summary["histogram_csv"] = hist_path.string();
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& [path, error] : corpus.failures)
        failures.push_back({{"path", path}, {"error", error}});
    summary["failures"] = std::move(failures);
    return summary.dump(2) + "\n";
}

}  // namespace musekit
