// musekit command-line tool. All music functionality comes from the C API
// in musekit.h; this file only parses arguments, walks directories and
// shapes output.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "musekit.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

[[noreturn]] void fail_usage(const std::string& message) {
    std::cerr << "usage error: " << message << "\n";
    std::exit(kExitUsage);
}

[[noreturn]] void fail_status(mk_status status) {
    std::cerr << "error: " << mk_status_name(status) << ": " << mk_last_error() << "\n";
    std::exit(kExitFailure);
}

void check(mk_status status) {
    if (status != MK_OK) fail_status(status);
}

std::string take_string(char* text) {
    std::string out = text ? text : "";
    mk_string_free(text);
    return out;
}

// extension -> format; empty when unknown
std::string format_of(const fs::path& path) {
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
    return "";
}

bool readable_format(const std::string& format) {
    return format == "midi" || format == "musicxml" || format == "mxl" ||
           format == "abc" || format == "muspy";
}

bool writable_format(const std::string& format) {
    return format == "midi" || format == "musicxml" || format == "muspy";
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "error: io: cannot open " << out_path << " for writing\n";
        std::exit(kExitFailure);
    }
    out << text;
}

std::vector<std::string> music_files_under(const fs::path& directory) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(directory))
        if (entry.is_regular_file() && !format_of(entry.path()).empty())
            files.push_back(entry.path().lexically_relative(directory).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

// --- subcommands ------------------------------------------------------------

int cmd_convert(const std::string& input, const std::string& output,
                const std::string& from, const std::string& to, int resolution) {
    std::string source_format = from.empty() ? format_of(input) : from;
    std::string target_format = to.empty() ? format_of(output) : to;
    if (source_format.empty())
        fail_usage("cannot infer the input format of \"" + input + "\"; use --from");
    if (target_format.empty())
        fail_usage("cannot infer the output format of \"" + output + "\"; use --to");
    if (!readable_format(source_format))
        fail_usage("unknown input format \"" + source_format + "\"");
    if (!writable_format(target_format))
        fail_usage("format \"" + target_format + "\" is not writable (midi|musicxml|muspy)");

    mk_music* music = nullptr;
    check(mk_music_read(input.c_str(), source_format.c_str(), &music));
    if (resolution > 0) {
        mk_status status = mk_music_adjust_resolution(music, resolution);
        if (status != MK_OK) {
            mk_music_free(music);
            fail_status(status);
        }
    }
    mk_status status = mk_music_write(music, output.c_str(), target_format.c_str());
    mk_music_free(music);
    if (status != MK_OK) fail_status(status);
    return 0;
}

int cmd_stats(const std::string& directory, const std::string& report,
              const std::string& out_prefix, const std::string& out_path) {
    char* summary = nullptr;
    mk_status status =
        mk_stats_run(directory.c_str(), report.c_str(), out_prefix.c_str(), &summary);
    if (status == MK_ERR_INVALID_ARGUMENT) fail_usage(mk_last_error());
    if (status != MK_OK) fail_status(status);
    emit(take_string(summary), out_path);
    return 0;
}

ordered_json metrics_of_file(const fs::path& path) {
    mk_music* music = nullptr;
    check(mk_music_read(path.string().c_str(), nullptr, &music));
    char* report = nullptr;
    mk_status status = mk_music_metrics_json(music, &report);
    mk_music_free(music);
    if (status != MK_OK) fail_status(status);
    return ordered_json::parse(take_string(report));
}

int cmd_metrics(const std::string& input, const std::string& out_path, unsigned workers) {
    if (!fs::is_directory(input)) {
        emit(metrics_of_file(input).dump(2) + "\n", out_path);
        return 0;
    }
    auto files = music_files_under(input);
    ordered_json by_file = ordered_json::object();
    std::vector<std::pair<std::string, std::string>> results(files.size());
    std::atomic<std::size_t> next{0};
    unsigned pool = std::max(1u, std::min<unsigned>(workers, std::thread::hardware_concurrency()));
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < pool; ++w)
        threads.emplace_back([&] {
            std::size_t i;
            while ((i = next.fetch_add(1)) < files.size()) {
                mk_music* music = nullptr;
                fs::path path = fs::path(input) / files[i];
                if (mk_music_read(path.string().c_str(), nullptr, &music) != MK_OK) {
                    results[i] = {files[i], std::string("!") + mk_last_error()};
                    continue;
                }
                char* report = nullptr;
                mk_status status = mk_music_metrics_json(music, &report);
                mk_music_free(music);
                results[i] = status == MK_OK
                                 ? std::make_pair(files[i], take_string(report))
                                 : std::make_pair(files[i],
                                                  std::string("!") + mk_last_error());
            }
        });
    for (auto& thread : threads) thread.join();
    for (const auto& [path, payload] : results) {
        if (!payload.empty() && payload[0] == '!')
            by_file[path] = {{"error", payload.substr(1)}};
        else
            by_file[path] = ordered_json::parse(payload);
    }
    emit(by_file.dump(2) + "\n", out_path);
    return 0;
}

int cmd_encode(const std::string& input, const std::string& repr, bool experiment,
               bool no_velocity, bool eos, int max_shift, int bins,
               const std::string& overlap, const std::string& mode, bool binary,
               const std::string& out_path) {
    ordered_json config = ordered_json::object();
    if (experiment) config["experiment"] = true;
    if (no_velocity) config["use_velocity"] = false;
    if (eos) config["use_end_of_sequence"] = true;
    if (max_shift > 0) config["max_time_shift"] = max_shift;
    if (bins > 0) config["velocity_bins"] = bins;
    config["overlap_policy"] = overlap;
    config["mode"] = mode;

    std::string out = out_path;
    if (out.empty()) {
        out = input;
        out += repr == "notes" || repr == "pianoroll" ? ".csv"
               : binary                               ? ".tokens.bin"
                                                      : ".tokens.txt";
    }
    mk_music* music = nullptr;
    check(mk_music_read(input.c_str(), nullptr, &music));
    mk_status status = mk_music_encode_file(music, repr.c_str(), config.dump().c_str(),
                                            out.c_str(), binary ? 1 : 0);
    mk_music_free(music);
    if (status == MK_ERR_INVALID_ARGUMENT) fail_usage(mk_last_error());
    if (status != MK_OK) fail_status(status);
    std::cout << out << "\n";
    return 0;
}

int cmd_dataset(const std::string& action, const std::string& manifest,
                const std::string& root, const std::string& ratios, std::uint64_t seed,
                const std::string& out_path) {
    char* report = nullptr;
    mk_status status = MK_OK;
    if (action == "download") {
        status = mk_dataset_download(manifest.c_str(), root.c_str(), &report);
    } else if (action == "convert") {
        status = mk_dataset_convert(manifest.c_str(), root.c_str(), &report);
    } else if (action == "split") {
        double train = 8, valid = 1, test = 1;
        if (std::sscanf(ratios.c_str(), "%lf:%lf:%lf", &train, &valid, &test) != 3)
            fail_usage("ratios must look like 8:1:1, got \"" + ratios + "\"");
        status = mk_dataset_split(manifest.c_str(), root.c_str(), train, valid, test,
                                  seed, out_path.empty() ? nullptr : out_path.c_str(),
                                  &report);
        if (status == MK_OK) {
            std::cout << take_string(report);
            return 0;
        }
    } else {
        fail_usage("unknown dataset action \"" + action + "\" (download|convert|split)");
    }
    if (status != MK_OK) fail_status(status);
    emit(take_string(report), out_path);
    return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_csv,
                   const std::string& out_json) {
    char* summary = nullptr;
    mk_status status = mk_experiment_run(
        config_path.c_str(), out_csv.empty() ? nullptr : out_csv.c_str(),
        out_json.empty() ? nullptr : out_json.c_str(), &summary);
    if (status != MK_OK) fail_status(status);
    std::string report = take_string(summary);
    if (out_csv.empty()) {
        // no file requested: print the matrix itself
        auto doc = ordered_json::parse(report);
        std::cout << "train\\test";
        for (const auto& label : doc["labels"]) std::cout << "," << label.get<std::string>();
        std::cout << "\n";
        std::size_t r = 0;
        for (const auto& row : doc["matrix"]) {
            std::cout << doc["labels"][r++].get<std::string>();
            for (const auto& cell : row) {
                char buffer[64];
                std::snprintf(buffer, sizeof buffer, "%.6f",
                              cell["log_perplexity"].get<double>());
                std::cout << "," << buffer;
            }
            std::cout << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"musekit: symbolic music conversion, encoding, metrics, datasets "
                 "and perplexity experiments"};
    app.require_subcommand(1);

    // convert
    std::string convert_in, convert_out, convert_from, convert_to;
    int convert_resolution = 0;
    auto* convert = app.add_subcommand("convert", "convert between music file formats");
    convert->add_option("input", convert_in, "input file")->required();
    convert->add_option("output", convert_out, "output file")->required();
    convert->add_option("--from", convert_from, "input format (midi|musicxml|mxl|abc|muspy)");
    convert->add_option("--to", convert_to, "output format (midi|musicxml|muspy)");
    convert->add_option("--resolution", convert_resolution,
                        "re-quantize to this many ticks per quarter");

    // stats
    std::string stats_dir, stats_report = "lengths", stats_prefix, stats_out;
    auto* stats = app.add_subcommand("stats", "corpus statistics (lengths, tempos, keys)");
    stats->add_option("directory", stats_dir, "directory of music files")->required();
    stats->add_option("--report", stats_report, "lengths|tempos|keys")->required();
    stats->add_option("--out-prefix", stats_prefix,
                      "prefix for <prefix>.csv and <prefix>_hist.csv")
        ->required();
    stats->add_option("--out", stats_out, "summary JSON file (default: stdout)");

    // metrics
    std::string metrics_in, metrics_out;
    unsigned metrics_workers = 4;
    auto* metrics = app.add_subcommand("metrics", "objective metrics for a file or directory");
    metrics->add_option("input", metrics_in, "music file or directory")->required();
    metrics->add_option("--out", metrics_out, "report file (default: stdout)");
    metrics->add_option("--workers", metrics_workers, "directory worker pool size");

    // encode
    std::string encode_in, encode_repr, encode_overlap = "error", encode_mode = "binary";
    std::string encode_out;
    bool encode_experiment = false, encode_no_velocity = false, encode_eos = false;
    bool encode_binary = false;
    int encode_max_shift = 0, encode_bins = 0;
    auto* encode = app.add_subcommand("encode", "encode music into a representation");
    encode->add_option("input", encode_in, "music file")->required();
    encode->add_option("--repr", encode_repr, "event|pitch|notes|pianoroll")->required();
    encode->add_flag("--experiment", encode_experiment,
                     "357-token setup (no velocities, end-of-sequence)");
    encode->add_flag("--no-velocity", encode_no_velocity, "drop velocity tokens");
    encode->add_flag("--eos", encode_eos, "append an end-of-sequence token");
    encode->add_option("--max-shift", encode_max_shift, "largest time-shift token in ticks");
    encode->add_option("--velocity-bins", encode_bins, "number of velocity bins");
    encode->add_option("--overlap", encode_overlap,
                       "pitch overlap policy: error|keep-highest|skip-new");
    encode->add_option("--mode", encode_mode, "piano-roll cells: binary|velocity");
    encode->add_flag("--binary", encode_binary, "length-prefixed binary tokens");
    encode->add_option("--out", encode_out, "output file (default: input + suffix)");

    // dataset
    std::string dataset_action, dataset_manifest, dataset_root, dataset_out;
    std::string dataset_ratios = "8:1:1";
    std::uint64_t dataset_seed = 0;
    auto* dataset = app.add_subcommand("dataset", "download, convert or split a corpus");
    dataset->add_option("action", dataset_action, "download|convert|split")->required();
    dataset->add_option("manifest", dataset_manifest, "dataset manifest JSON")->required();
    dataset->add_option("--root", dataset_root, "corpus root directory")->required();
    dataset->add_option("--ratios", dataset_ratios, "split ratios, e.g. 8:1:1");
    dataset->add_option("--seed", dataset_seed, "split shuffle seed");
    dataset->add_option("--out", dataset_out, "report/split file (default: stdout)");

    // experiment
    std::string experiment_config, experiment_csv, experiment_json;
    auto* experiment =
        app.add_subcommand("experiment", "cross-dataset perplexity experiment");
    experiment->add_option("config", experiment_config, "experiment config JSON")
        ->required();
    experiment->add_option("--out-csv", experiment_csv, "matrix CSV file");
    experiment->add_option("--out-json", experiment_json, "full report JSON file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    if (convert->parsed())
        return cmd_convert(convert_in, convert_out, convert_from, convert_to,
                           convert_resolution);
    if (stats->parsed()) return cmd_stats(stats_dir, stats_report, stats_prefix, stats_out);
    if (metrics->parsed()) return cmd_metrics(metrics_in, metrics_out, metrics_workers);
    if (encode->parsed())
        return cmd_encode(encode_in, encode_repr, encode_experiment, encode_no_velocity,
                          encode_eos, encode_max_shift, encode_bins, encode_overlap,
                          encode_mode, encode_binary, encode_out);
    if (dataset->parsed())
        return cmd_dataset(dataset_action, dataset_manifest, dataset_root, dataset_ratios,
                           dataset_seed, dataset_out);
    if (experiment->parsed())
        return cmd_experiment(experiment_config, experiment_csv, experiment_json);
    return kExitUsage;
}
