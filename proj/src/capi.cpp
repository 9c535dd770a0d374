#include "musekit.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "musekit/abc_io.hpp"
#include "musekit/datasets.hpp"
#include "musekit/harness.hpp"
#include "musekit/metrics.hpp"
#include "musekit/midi_io.hpp"
#include "musekit/musicxml_io.hpp"
#include "musekit/representations.hpp"
#include "musekit/serialization.hpp"
#include "musekit/stats.hpp"

struct mk_music {
    musekit::Music value;
};

namespace {

using namespace musekit;

thread_local std::string g_last_error;

mk_status status_of(errc code) {
    switch (code) {
        case errc::ok: return MK_OK;
        case errc::invalid_argument: return MK_ERR_INVALID_ARGUMENT;
        case errc::validation: return MK_ERR_VALIDATION;
        case errc::parse: return MK_ERR_PARSE;
        case errc::schema: return MK_ERR_SCHEMA;
        case errc::version: return MK_ERR_VERSION;
        case errc::unsupported: return MK_ERR_UNSUPPORTED;
        case errc::domain: return MK_ERR_DOMAIN;
        case errc::io: return MK_ERR_IO;
        case errc::archive: return MK_ERR_ARCHIVE;
        case errc::integrity: return MK_ERR_INTEGRITY;
        case errc::transfer: return MK_ERR_TRANSFER;
        case errc::config: return MK_ERR_CONFIG;
        case errc::internal: return MK_ERR_INTERNAL;
    }
    return MK_ERR_INTERNAL;
}

template <typename Fn>
mk_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MK_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MK_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (out) std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) throw Error(errc::invalid_argument, what);
}

std::string infer_format(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    auto ends_with = [&](std::string_view suffix) {
        return name.size() >= suffix.size() &&
               name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".mid") || ends_with(".midi")) return "midi";
    if (ends_with(".xml") || ends_with(".musicxml")) return "musicxml";
    if (ends_with(".mxl")) return "mxl";
    if (ends_with(".abc")) return "abc";
    if (ends_with(".muspy.json") || ends_with(".json")) return "muspy";
    throw Error(errc::invalid_argument,
                "cannot infer a format from \"" + name + "\"; pass one explicitly");
}

Music read_music(const std::filesystem::path& path, const std::string& format) {
    if (format == "midi") return read_midi_file(path);
    if (format == "musicxml") return read_musicxml_file(path);
    if (format == "mxl") return read_mxl_file(path);
    if (format == "muspy") return load_file(path);
    if (format == "abc") {
        auto tunes = read_abc_file(path);
        if (tunes.empty()) throw Error(errc::schema, "no tunes in " + path.string());
        return tunes.front();
    }
    throw Error(errc::invalid_argument, "unknown format \"" + format + "\"");
}

void write_music(const Music& music, const std::filesystem::path& path,
                 const std::string& format) {
    if (format == "midi") return write_midi_file(music, path);
    if (format == "musicxml") return write_musicxml_file(music, path);
    if (format == "muspy") return save_file(music, path);
    if (format == "mxl" || format == "abc")
        throw Error(errc::unsupported, "writing " + format + " is not supported");
    throw Error(errc::invalid_argument, "unknown format \"" + format + "\"");
}

void write_file_bytes(const std::filesystem::path& path, const void* data,
                      std::size_t size) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out.write(static_cast<const char*>(data), std::streamsize(size));
    if (!out) throw Error(errc::io, "failed writing " + path.string());
}

void write_tokens(const EncodedSequence& seq, const std::filesystem::path& path,
                  bool binary) {
    if (binary) {
        std::vector<std::uint8_t> bytes;
        auto put32 = [&](std::uint32_t v) {
            for (int shift = 0; shift < 32; shift += 8)
                bytes.push_back(std::uint8_t(v >> shift & 0xFF));
        };
        put32(std::uint32_t(seq.tokens.size()));
        for (std::int32_t token : seq.tokens) put32(std::uint32_t(token));
        write_file_bytes(path, bytes.data(), bytes.size());
        return;
    }
    std::string text;
    for (std::int32_t token : seq.tokens) {
        text += std::to_string(token);
        text += '\n';
    }
    write_file_bytes(path, text.data(), text.size());
}

struct EncodeOptions {
    EventConfig event;
    OverlapPolicy policy = OverlapPolicy::error;
    PianoRollMode mode = PianoRollMode::binary;
};

EncodeOptions parse_encode_config(const char* config_json) {
    EncodeOptions options;
    if (!config_json || !*config_json) return options;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(errc::parse, std::string("malformed encode config: ") + e.what());
    }
    if (doc.value("experiment", false)) options.event = EventConfig::experiment();
    options.event.use_velocity = doc.value("use_velocity", options.event.use_velocity);
    options.event.velocity_bins = doc.value("velocity_bins", options.event.velocity_bins);
    options.event.max_time_shift =
        doc.value("max_time_shift", options.event.max_time_shift);
    options.event.use_end_of_sequence =
        doc.value("use_end_of_sequence", options.event.use_end_of_sequence);
    std::string policy = doc.value("overlap_policy", "error");
    if (policy == "error") options.policy = OverlapPolicy::error;
    else if (policy == "keep-highest") options.policy = OverlapPolicy::keep_highest;
    else if (policy == "skip-new") options.policy = OverlapPolicy::skip_new;
    else throw Error(errc::invalid_argument, "unknown overlap_policy \"" + policy + "\"");
    std::string mode = doc.value("mode", "binary");
    if (mode == "binary") options.mode = PianoRollMode::binary;
    else if (mode == "velocity") options.mode = PianoRollMode::velocity;
    else throw Error(errc::invalid_argument, "unknown piano-roll mode \"" + mode + "\"");
    return options;
}

}  // namespace

extern "C" {

const char* mk_version(void) { return "1.0.0"; }

const char* mk_status_name(mk_status status) {
    switch (status) {
        case MK_OK: return "ok";
        case MK_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case MK_ERR_VALIDATION: return "validation";
        case MK_ERR_PARSE: return "parse";
        case MK_ERR_SCHEMA: return "schema";
        case MK_ERR_VERSION: return "version";
        case MK_ERR_UNSUPPORTED: return "unsupported";
        case MK_ERR_DOMAIN: return "domain";
        case MK_ERR_IO: return "io";
        case MK_ERR_ARCHIVE: return "archive";
        case MK_ERR_INTEGRITY: return "integrity";
        case MK_ERR_TRANSFER: return "transfer";
        case MK_ERR_CONFIG: return "config";
        case MK_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* mk_last_error(void) { return g_last_error.c_str(); }

void mk_string_free(char* text) { std::free(text); }

mk_status mk_music_read(const char* path, const char* format, mk_music** out) {
    return guarded([&] {
        require(path && out, "path and out must not be null");
        std::filesystem::path file(path);
        std::string chosen = format && *format ? format : infer_format(file);
        *out = new mk_music{read_music(file, chosen)};
    });
}

mk_status mk_music_write(const mk_music* music, const char* path, const char* format) {
    return guarded([&] {
        require(music && path, "music and path must not be null");
        std::filesystem::path file(path);
        std::string chosen = format && *format ? format : infer_format(file);
        write_music(music->value, file, chosen);
    });
}

void mk_music_free(mk_music* music) { delete music; }

mk_status mk_music_adjust_resolution(mk_music* music, int target) {
    return guarded([&] {
        require(music != nullptr, "music must not be null");
        music->value = adjust_resolution(std::move(music->value), target);
    });
}

int mk_music_resolution(const mk_music* music) {
    return music ? music->value.resolution : 0;
}

int64_t mk_music_end_time(const mk_music* music) {
    return music ? end_time(music->value) : 0;
}

double mk_music_duration_seconds(const mk_music* music) {
    return music ? duration_seconds(music->value) : 0.0;
}

size_t mk_music_track_count(const mk_music* music) {
    return music ? music->value.tracks.size() : 0;
}

size_t mk_music_note_count(const mk_music* music) {
    if (!music) return 0;
    size_t count = 0;
    for (const auto& track : music->value.tracks) count += track.notes.size();
    return count;
}

mk_status mk_music_validate(const mk_music* music, char** violations_json) {
    return guarded([&] {
        require(music && violations_json, "music and out must not be null");
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const auto& violation : validate(music->value))
            list.push_back({{"field", violation.field}, {"message", violation.message}});
        *violations_json = dup_string(list.dump(2) + "\n");
    });
}

mk_status mk_music_to_json(const mk_music* music, char** document) {
    return guarded([&] {
        require(music && document, "music and out must not be null");
        *document = dup_string(save(music->value));
    });
}

mk_status mk_music_metrics_json(const mk_music* music, char** report_json) {
    return guarded([&] {
        require(music && report_json, "music and out must not be null");
        *report_json = dup_string(evaluate_all(music->value).to_json());
    });
}

mk_status mk_music_encode_file(const mk_music* music, const char* representation,
                               const char* config_json, const char* out_path,
                               int binary_tokens) {
    return guarded([&] {
        require(music && representation && out_path,
                "music, representation and out_path must not be null");
        EncodeOptions options = parse_encode_config(config_json);
        std::string kind(representation);
        std::filesystem::path path(out_path);
        if (kind == "event") {
            write_tokens(encode_event(music->value, options.event), path,
                         binary_tokens != 0);
        } else if (kind == "pitch") {
            write_tokens(encode_pitch(music->value, options.policy), path,
                         binary_tokens != 0);
        } else if (kind == "notes") {
            NoteTable table = encode_notes(music->value);
            std::string text = "time,pitch,duration,velocity\n";
            for (const auto& row : table.rows)
                text += std::to_string(row.time) + "," + std::to_string(row.pitch) + "," +
                        std::to_string(row.duration) + "," + std::to_string(row.velocity) +
                        "\n";
            write_file_bytes(path, text.data(), text.size());
        } else if (kind == "pianoroll") {
            PianoRoll roll = encode_pianoroll(music->value, options.mode);
            std::string text;
            for (std::size_t t = 0; t < roll.steps; ++t) {
                for (int p = 0; p < 128; ++p) {
                    if (p) text += ',';
                    text += std::to_string(int(roll.at(t, p)));
                }
                text += '\n';
            }
            write_file_bytes(path, text.data(), text.size());
        } else {
            throw Error(errc::invalid_argument,
                        "unknown representation \"" + kind +
                            "\" (event|pitch|notes|pianoroll)");
        }
    });
}

mk_status mk_stats_run(const char* directory, const char* report, const char* out_prefix,
                       char** summary_json) {
    return guarded([&] {
        require(directory && report && out_prefix,
                "directory, report and out_prefix must not be null");
        StatCorpus corpus = collect_stats(directory);
        std::string summary =
            write_stat_report(corpus, stat_report_kind(report), out_prefix);
        if (summary_json) *summary_json = dup_string(summary);
    });
}

mk_status mk_dataset_download(const char* manifest_path, const char* root,
                              char** report_json) {
    return guarded([&] {
        require(manifest_path && root, "manifest and root must not be null");
        DownloadReport report =
            download(DatasetManifest::load_file(manifest_path), root);
        if (report_json) *report_json = dup_string(report.to_json());
    });
}

mk_status mk_dataset_convert(const char* manifest_path, const char* root,
                             char** report_json) {
    return guarded([&] {
        require(manifest_path && root, "manifest and root must not be null");
        CorpusHandle handle{root, CorpusMode::on_the_fly,
                            DatasetManifest::load_file(manifest_path)};
        ConvertReport report = convert(handle);
        if (report_json) *report_json = dup_string(report.to_json());
    });
}

mk_status mk_dataset_split(const char* manifest_path, const char* root, double train,
                           double valid, double test, uint64_t seed,
                           const char* out_path, char** report_json) {
    return guarded([&] {
        require(manifest_path && root, "manifest and root must not be null");
        CorpusHandle handle{root, CorpusMode::on_the_fly,
                            DatasetManifest::load_file(manifest_path)};
        DatasetSplit parts = split(handle, {train, valid, test}, seed);
        std::string text = parts.to_json();
        if (out_path) write_file_bytes(out_path, text.data(), text.size());
        if (report_json) *report_json = dup_string(text);
    });
}

mk_status mk_experiment_run(const char* config_path, const char* out_csv,
                            const char* out_json, char** summary_json) {
    return guarded([&] {
        require(config_path != nullptr, "config_path must not be null");
        ExperimentResult result =
            run_experiment(ExperimentConfig::load_file(config_path));
        std::string csv = result.matrix.to_csv();
        if (out_csv) write_file_bytes(out_csv, csv.data(), csv.size());
        if (out_json)
            write_file_bytes(out_json, result.report_json.data(),
                             result.report_json.size());
        if (summary_json) *summary_json = dup_string(result.report_json);
    });
}

}  // extern "C"
