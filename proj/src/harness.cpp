#include "musekit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "rng.hpp"

namespace musekit {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<Window> window_tokens(const std::vector<std::int32_t>& tokens) {
    std::vector<Window> windows;
    for (std::size_t at = 0; at + kWindowLength <= tokens.size(); at += kWindowLength) {
        Window window;
        std::copy_n(tokens.begin() + std::ptrdiff_t(at), kWindowLength, window.begin());
        windows.push_back(window);
    }
    return windows;
}

Music strip_to_melody(Music music) {
    // first non-drum track only, chord annotations dropped
    std::vector<Track> kept;
    for (auto& track : music.tracks) {
        if (track.is_drum) continue;
        track.chords.clear();
        kept.push_back(std::move(track));
        break;
    }
    music.tracks = std::move(kept);
    return music;
}

void add_song(PreparedCorpus& corpus, const Music& music, bool melody_only) {
    ++corpus.songs_total;
    Music song = melody_only ? strip_to_melody(music) : music;
    song = adjust_resolution(std::move(song), kExperimentResolution);
    EncodedSequence seq = encode_event(song, EventConfig::experiment());
    auto windows = window_tokens(seq.tokens);
    if (windows.empty()) {
        ++corpus.songs_too_short;
        return;
    }
    corpus.windows.insert(corpus.windows.end(), windows.begin(), windows.end());
}

}  // namespace

const char* split_part_name(SplitPart part) {
    switch (part) {
        case SplitPart::train: return "train";
        case SplitPart::valid: return "valid";
        case SplitPart::test: return "test";
        case SplitPart::all: return "all";
    }
    return "all";
}

PreparedCorpus prepare(const CorpusHandle& handle, const DatasetSplit* split,
                       SplitPart part) {
    PreparedCorpus corpus;
    corpus.corpus_name = handle.manifest.name;
    corpus.part = split_part_name(part);

    std::set<std::string> member_filter;
    if (split && part != SplitPart::all) {
        const auto& files = split->parts[std::size_t(part)];
        member_filter.insert(files.begin(), files.end());
    }

    CorpusIterator it(handle);
    for (std::size_t i = 0; i < it.size(); ++i) {
        if (!member_filter.empty() && member_filter.count(it.keys()[i]) == 0) continue;
        CorpusItem item = it.load(i);
        if (!item.ok()) {
            ++corpus.songs_failed;
            ++corpus.songs_total;
            continue;
        }
        add_song(corpus, *item.music, handle.manifest.preprocess.melody_only);
    }
    return corpus;
}

PreparedCorpus prepare_songs(const std::vector<Music>& songs, const std::string& name) {
    PreparedCorpus corpus;
    corpus.corpus_name = name;
    corpus.part = "all";
    for (const auto& song : songs) add_song(corpus, song, false);
    return corpus;
}

// --- n-gram -------------------------------------------------------------------

namespace {

// context key: 9 bits per token (vocabulary < 512), oldest token highest
std::uint64_t context_key(std::span<const std::int32_t> context) {
    std::uint64_t key = 0;
    for (std::int32_t token : context) key = (key << 9) | std::uint64_t(token + 1);
    return key;
}

}  // namespace

NGramModel NGramModel::train(const PreparedCorpus& corpus, int order, double alpha) {
    if (order < 1 || order > kMaxOrder)
        throw Error(errc::invalid_argument,
                    "n-gram order must be in [1, " + std::to_string(kMaxOrder) + "], got " +
                        std::to_string(order));
    if (!(alpha > 0))
        throw Error(errc::invalid_argument, "smoothing constant must be > 0");
    if (corpus.windows.empty())
        throw Error(errc::invalid_argument,
                    "cannot train on \"" + corpus.corpus_name + "\": no windows");

    NGramModel model;
    model.order_ = order;
    model.alpha_ = alpha;
    model.vocabulary_ = corpus.vocabulary;
    for (const auto& window : corpus.windows) {
        for (int at = 0; at < kWindowLength; ++at) {
            int context_length = std::min(at, order - 1);
            std::span<const std::int32_t> context(window.data() + at - context_length,
                                                  std::size_t(context_length));
            auto& row = model.rows_[context_key(context)];
            ++row.total;
            ++row.counts[window[std::size_t(at)]];
        }
    }
    return model;
}

void NGramModel::distribution(std::span<const std::int32_t> context,
                              std::vector<double>& probabilities) const {
    if (context.size() > std::size_t(order_ - 1))
        context = context.subspan(context.size() - std::size_t(order_ - 1));
    const double v = double(vocabulary_);
    auto row = rows_.find(context_key(context));
    if (row == rows_.end()) {
        probabilities.assign(std::size_t(vocabulary_), 1.0 / v);
        return;
    }
    const double denominator = double(row->second.total) + alpha_ * v;
    probabilities.assign(std::size_t(vocabulary_), alpha_ / denominator);
    for (const auto& [token, count] : row->second.counts)
        probabilities[std::size_t(token)] = (double(count) + alpha_) / denominator;
}

// --- perplexity -----------------------------------------------------------------

PerplexityResult perplexity(const SequenceModel& model, const PreparedCorpus& corpus,
                            std::size_t sample_count, std::uint64_t seed) {
    if (corpus.windows.empty())
        throw Error(errc::invalid_argument,
                    "cannot evaluate on \"" + corpus.corpus_name + "\": no windows");
    if (sample_count == 0)
        throw Error(errc::invalid_argument, "sample count must be >= 1");
    if (model.vocabulary() != corpus.vocabulary)
        throw Error(errc::config, "model vocabulary " + std::to_string(model.vocabulary()) +
                                      " does not match corpus vocabulary " +
                                      std::to_string(corpus.vocabulary));

    PerplexityResult result;
    result.samples = sample_count;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picks;
    if (sample_count <= corpus.windows.size()) {
        picks = sample_indices(rng, corpus.windows.size(), sample_count);
    } else {
        result.with_replacement = true;
        picks.reserve(sample_count);
        for (std::size_t i = 0; i < sample_count; ++i)
            picks.push_back(std::size_t(bounded(rng, corpus.windows.size())));
    }

    double log_sum = 0.0;
    std::vector<double> probabilities;
    for (std::size_t pick : picks) {
        const Window& window = corpus.windows[pick];
        for (int at = 0; at < kWindowLength; ++at) {
            std::span<const std::int32_t> context(window.data(), std::size_t(at));
            model.distribution(context, probabilities);
            double p = probabilities.at(std::size_t(window[std::size_t(at)]));
            if (!(p > 0.0))
                throw Error(errc::domain,
                            "model assigned zero probability (smoothing floor violated)");
            log_sum += std::log(p);
            ++result.tokens;
        }
    }
    result.log_perplexity = -log_sum / double(result.tokens);
    result.perplexity = std::exp(result.log_perplexity);
    return result;
}

// --- cross matrix ----------------------------------------------------------------

std::string CrossMatrix::to_csv() const {
    std::ostringstream out;
    out << "train\\test";
    for (const auto& label : labels) out << "," << label;
    out << "\n";
    char cell[64];
    for (std::size_t r = 0; r < labels.size(); ++r) {
        out << labels[r];
        for (std::size_t c = 0; c < labels.size(); ++c) {
            std::snprintf(cell, sizeof cell, "%.6f", log_perplexity[r][c]);
            out << "," << cell;
        }
        out << "\n";
    }
    return out.str();
}

CrossMatrix cross_matrix(
    const std::vector<std::pair<PreparedCorpus, PreparedCorpus>>& train_test_pairs,
    const NGramSpec& spec, std::size_t sample_count, std::uint64_t seed) {
    if (train_test_pairs.size() < 2)
        throw Error(errc::invalid_argument,
                    "a cross matrix needs at least two corpora, got " +
                        std::to_string(train_test_pairs.size()));

    const std::size_t n = train_test_pairs.size();
    std::vector<NGramModel> models;
    models.reserve(n);
    for (const auto& [train, test] : train_test_pairs)
        models.push_back(NGramModel::train(train, spec.order, spec.alpha));

    std::vector<std::vector<double>> raw(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> logs(n, std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            // one shared seed: a test corpus samples the same windows for
            // every model, so duplicated corpora give a symmetric matrix
            auto result =
                perplexity(models[r], train_test_pairs[c].second, sample_count, seed);
            raw[r][c] = result.perplexity;
            logs[r][c] = result.log_perplexity;
        }

    // sort rows and columns together by the in-domain value
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logs[a][a] < logs[b][b]; });

    CrossMatrix matrix;
    for (std::size_t i = 0; i < n; ++i)
        matrix.labels.push_back(train_test_pairs[order[i]].first.corpus_name);
    matrix.log_perplexity.assign(n, std::vector<double>(n, 0.0));
    matrix.raw_perplexity.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            matrix.log_perplexity[r][c] = logs[order[r]][order[c]];
            matrix.raw_perplexity[r][c] = raw[order[r]][order[c]];
        }
    return matrix;
}

PreparedCorpus unified_corpus(const std::vector<PreparedCorpus>& parts, UnifiedMode mode,
                              std::uint64_t seed, std::size_t size) {
    if (parts.empty())
        throw Error(errc::config, "unified corpus needs at least one part");
    PreparedCorpus out;
    out.corpus_name = "unified";
    out.part = parts.front().part;
    for (const auto& part : parts) {
        if (part.windows.empty())
            throw Error(errc::config,
                        "corpus \"" + part.corpus_name + "\" contributes no windows");
        out.songs_total += part.songs_total;
        out.songs_too_short += part.songs_too_short;
        out.songs_failed += part.songs_failed;
    }
    if (mode == UnifiedMode::concatenated) {
        for (const auto& part : parts)
            out.windows.insert(out.windows.end(), part.windows.begin(),
                               part.windows.end());
        return out;
    }
    if (size == 0)
        for (const auto& part : parts) size += part.windows.size();
    std::mt19937_64 rng(seed);
    out.windows.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        const auto& part = parts[bounded(rng, parts.size())];
        out.windows.push_back(part.windows[bounded(rng, part.windows.size())]);
    }
    return out;
}

// --- experiment runner -----------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(errc::parse, std::string("malformed experiment config: ") + e.what());
    }
    ExperimentConfig config;
    if (!doc.contains("corpora") || !doc["corpora"].is_array() || doc["corpora"].size() < 2)
        throw Error(errc::config, "experiment config needs at least two corpora");
    for (const auto& entry : doc["corpora"]) {
        ExperimentCorpus corpus;
        corpus.name = entry.value("name", "");
        corpus.manifest_path = entry.value("manifest", "");
        corpus.root = entry.value("root", "");
        corpus.mode = entry.value("mode", "on_the_fly") == std::string("preconverted")
                          ? CorpusMode::preconverted
                          : CorpusMode::on_the_fly;
        if (corpus.manifest_path.empty() || corpus.root.empty())
            throw Error(errc::config, "every corpus needs a manifest and a root");
        config.corpora.push_back(std::move(corpus));
    }
    if (doc.contains("model")) {
        config.model.order = doc["model"].value("order", 2);
        config.model.alpha = doc["model"].value("alpha", 0.01);
    }
    if (doc.contains("split")) {
        if (doc["split"].contains("ratios"))
            for (std::size_t i = 0; i < 3; ++i)
                config.ratios[i] = doc["split"]["ratios"].at(i).get<double>();
        config.split_seed = doc["split"].value("seed", std::uint64_t(0));
    }
    config.sample_count = doc.value("sample_count", std::size_t(1000));
    config.seed = doc.value("seed", std::uint64_t(0));
    if (doc.contains("unified")) {
        config.include_unified = doc["unified"].value("enabled", false);
        config.unified_mode = doc["unified"].value("mode", "concatenated") ==
                                      std::string("stratified")
                                  ? UnifiedMode::stratified
                                  : UnifiedMode::concatenated;
        config.unified_size = doc["unified"].value("size", std::size_t(0));
    }
    return config;
}

ExperimentConfig ExperimentConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open experiment config " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    std::vector<std::pair<PreparedCorpus, PreparedCorpus>> pairs;
    ordered_json corpora_report = ordered_json::array();

    for (const auto& entry : config.corpora) {
        CorpusHandle handle;
        handle.root = entry.root;
        handle.mode = entry.mode;
        handle.manifest = DatasetManifest::load_file(entry.manifest_path);
        if (!entry.name.empty()) handle.manifest.name = entry.name;

        DatasetSplit parts = split(handle, config.ratios, config.split_seed);
        PreparedCorpus train = prepare(handle, &parts, SplitPart::train);
        PreparedCorpus test = prepare(handle, &parts, SplitPart::test);

        ordered_json c = ordered_json::object();
        c["name"] = handle.manifest.name;
        c["train_windows"] = train.windows.size();
        c["test_windows"] = test.windows.size();
        c["songs_total"] = train.songs_total + test.songs_total;
        c["songs_too_short"] = train.songs_too_short + test.songs_too_short;
        c["songs_failed"] = train.songs_failed + test.songs_failed;
        corpora_report.push_back(std::move(c));

        pairs.emplace_back(std::move(train), std::move(test));
    }

    if (config.include_unified) {
        std::vector<PreparedCorpus> trains, tests;
        for (const auto& [train, test] : pairs) {
            trains.push_back(train);
            tests.push_back(test);
        }
        PreparedCorpus unified_train = unified_corpus(trains, config.unified_mode,
                                                      config.seed, config.unified_size);
        // stratification is train-only: the test pool is always plain
        PreparedCorpus unified_test =
            unified_corpus(tests, UnifiedMode::concatenated, config.seed, 0);
        unified_train.corpus_name = unified_test.corpus_name =
            config.unified_mode == UnifiedMode::stratified ? "unified-stratified"
                                                           : "unified";
        pairs.emplace_back(std::move(unified_train), std::move(unified_test));
    }

    ExperimentResult result;
    result.matrix = cross_matrix(pairs, config.model, config.sample_count, config.seed);

    ordered_json report = ordered_json::object();
    report["model"] = {{"type", "ngram"},
                       {"order", config.model.order},
                       {"alpha", config.model.alpha}};
    report["split"] = {{"ratios", config.ratios}, {"seed", config.split_seed}};
    report["sample_count"] = config.sample_count;
    report["seed"] = config.seed;
    report["vocabulary"] = kExperimentVocabulary;
    report["window_length"] = kWindowLength;
    report["corpora"] = std::move(corpora_report);
    report["labels"] = result.matrix.labels;
    ordered_json cells = ordered_json::array();
    for (std::size_t r = 0; r < result.matrix.labels.size(); ++r) {
        ordered_json row = ordered_json::array();
        for (std::size_t c = 0; c < result.matrix.labels.size(); ++c)
            row.push_back({{"log_perplexity", result.matrix.log_perplexity[r][c]},
                           {"perplexity", result.matrix.raw_perplexity[r][c]}});
        cells.push_back(std::move(row));
    }
    report["matrix"] = std::move(cells);
    result.report_json = report.dump(2) + "\n";
    return result;
}

}  // namespace musekit
