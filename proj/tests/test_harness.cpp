#include <doctest.h>

#include <cmath>
#include <random>

#include "musekit/harness.hpp"
#include "musekit/midi_io.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace musekit;

namespace {

// melodies over a bounded pitch range, long enough for several windows
Music synthetic_song(std::mt19937_64& rng, int pitch_lo, int pitch_hi, int notes = 48) {
    Music music;
    music.resolution = kExperimentResolution;
    music.tracks.push_back(Track{});
    Tick cursor = 0;
    for (int i = 0; i < notes; ++i) {
        Tick duration = 1 + Tick(bounded(rng, 4));
        music.tracks[0].notes.push_back(
            Note{cursor, pitch_lo + int(bounded(rng, std::uint64_t(pitch_hi - pitch_lo))),
                 duration, 64});
        cursor += duration + Tick(bounded(rng, 2));
    }
    return music;
}

std::vector<Music> synthetic_corpus(std::uint64_t seed, int pitch_lo, int pitch_hi,
                                    int songs = 24) {
    std::mt19937_64 rng(seed);
    std::vector<Music> out;
    for (int i = 0; i < songs; ++i) out.push_back(synthetic_song(rng, pitch_lo, pitch_hi));
    return out;
}

// deterministic: all probability mass on the reference window's next token
class PeekingModel : public SequenceModel {
public:
    PeekingModel(Window reference, int vocabulary)
        : reference_(reference), vocabulary_(vocabulary) {}

    int vocabulary() const override { return vocabulary_; }

    void distribution(std::span<const std::int32_t> context,
                      std::vector<double>& probabilities) const override {
        probabilities.assign(std::size_t(vocabulary_), 0.0);
        probabilities[std::size_t(reference_[context.size()])] = 1.0;
    }

private:
    Window reference_;
    int vocabulary_;
};

}  // namespace

TEST_CASE("prepare windows songs at the experiment settings") {
    // 130 tokens -> 2 windows; 63 -> none. A song with n notes and no
    // simultaneities encodes to >= 2n tokens plus shifts plus EOS.
    std::vector<Music> songs = synthetic_corpus(1, 60, 72, 1);
    PreparedCorpus corpus = prepare_songs(songs, "demo");
    CHECK(corpus.vocabulary == 357);
    CHECK(corpus.songs_total == 1);
    for (const auto& window : corpus.windows)
        for (auto token : window) {
            CHECK(token >= 0);
            CHECK(token < 357);
        }

    Music tiny;
    tiny.resolution = 4;
    tiny.tracks.push_back(Track{});
    tiny.tracks[0].notes.push_back(Note{0, 60, 4, 64});
    PreparedCorpus small = prepare_songs({tiny}, "tiny");
    CHECK(small.windows.empty());
    CHECK(small.songs_too_short == 1);
}

TEST_CASE("prepare window count is floor(tokens / 64)") {
    // build a song whose encoding length is known: k notes at distinct
    // ticks, one tick apart, no velocity tokens, EOS appended
    Music music;
    music.resolution = 4;
    music.tracks.push_back(Track{});
    for (int i = 0; i < 43; ++i)
        music.tracks[0].notes.push_back(Note{Tick(i * 2), 60 + (i % 12), 1, 64});
    // per note: shift, on, shift, off = 4 tokens after the first; plus EOS
    EncodedSequence seq = encode_event(music, EventConfig::experiment());
    PreparedCorpus corpus = prepare_songs({music}, "exact");
    CHECK(corpus.windows.size() == seq.tokens.size() / 64);
}

TEST_CASE("uniform model perplexity equals the vocabulary size") {
    PreparedCorpus corpus = prepare_songs(synthetic_corpus(2, 50, 80, 8), "uniform");
    REQUIRE(!corpus.windows.empty());
    UniformModel model(corpus.vocabulary);
    auto result = perplexity(model, corpus, 50, 7);
    CHECK(result.perplexity == doctest::Approx(357.0).epsilon(1e-12));
    CHECK(result.log_perplexity == doctest::Approx(std::log(357.0)).epsilon(1e-12));
}

TEST_CASE("a model that always knows the next token reaches perplexity 1") {
    PreparedCorpus songs = prepare_songs(synthetic_corpus(3, 50, 80, 4), "oracle");
    REQUIRE(!songs.windows.empty());
    PreparedCorpus corpus;
    corpus.vocabulary = songs.vocabulary;
    corpus.corpus_name = "oracle";
    corpus.windows.assign(5, songs.windows.front());  // one window, repeated
    PeekingModel model(corpus.windows.front(), corpus.vocabulary);
    auto result = perplexity(model, corpus, 5, 7);
    CHECK(result.perplexity == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-symbol analytic perplexity") {
    // windows alternating between two tokens; a bigram trained on them puts
    // all mass on the continuation, a unigram approaches 2
    PreparedCorpus corpus;
    corpus.vocabulary = 357;
    Window window;
    for (int i = 0; i < kWindowLength; ++i) window[std::size_t(i)] = i % 2 == 0 ? 10 : 20;
    corpus.windows.assign(4, window);
    corpus.corpus_name = "two-symbol";

    NGramModel unigram = NGramModel::train(corpus, 1, 1e-12);
    auto result = perplexity(unigram, corpus, 4, 3);
    CHECK(result.perplexity == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("perplexity is invariant to the sampled multiset order") {
    PreparedCorpus corpus = prepare_songs(synthetic_corpus(4, 40, 70, 10), "sorted");
    NGramModel model = NGramModel::train(corpus, 2, 0.05);
    auto all = perplexity(model, corpus, corpus.windows.size(), 11);
    PreparedCorpus reversed = corpus;
    std::reverse(reversed.windows.begin(), reversed.windows.end());
    auto reversed_result =
        perplexity(model, reversed, reversed.windows.size(), 11);
    CHECK(all.perplexity == doctest::Approx(reversed_result.perplexity).epsilon(1e-12));
}

TEST_CASE("training determinism and error paths") {
    PreparedCorpus corpus = prepare_songs(synthetic_corpus(5, 40, 70, 6), "det");
    NGramModel a = NGramModel::train(corpus, 3, 0.5);
    NGramModel b = NGramModel::train(corpus, 3, 0.5);
    auto ra = perplexity(a, corpus, 20, 1);
    auto rb = perplexity(b, corpus, 20, 1);
    CHECK(ra.perplexity == rb.perplexity);

    PreparedCorpus empty;
    CHECK_THROWS_AS(NGramModel::train(empty, 2, 0.1), Error);
    CHECK_THROWS_AS(NGramModel::train(corpus, 0, 0.1), Error);
    CHECK_THROWS_AS(NGramModel::train(corpus, 9, 0.1), Error);
    CHECK_THROWS_AS(NGramModel::train(corpus, 2, 0.0), Error);
    UniformModel uniform(357);
    CHECK_THROWS_AS(perplexity(uniform, empty, 5, 1), Error);
}

TEST_CASE("unigram smoothing formula matches hand computation") {
    // one window of a single repeated token
    PreparedCorpus corpus;
    corpus.vocabulary = 357;
    Window window;
    window.fill(42);
    corpus.windows.push_back(window);
    corpus.corpus_name = "repeat";

    double alpha = 0.25;
    NGramModel model = NGramModel::train(corpus, 1, alpha);
    std::vector<double> probabilities;
    model.distribution({}, probabilities);
    double expected = (64.0 + alpha) / (64.0 + alpha * 357.0);
    CHECK(probabilities[42] == doctest::Approx(expected).epsilon(1e-12));
    double sum = 0;
    for (double p : probabilities) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("alpha to infinity approaches the uniform model monotonically") {
    // distinct tokens so every count is at most 1
    PreparedCorpus corpus;
    corpus.vocabulary = 357;
    Window window;
    for (int i = 0; i < kWindowLength; ++i) window[std::size_t(i)] = i;
    corpus.windows.push_back(window);
    corpus.corpus_name = "alpha";

    double previous_distance = 1e300;
    for (double alpha : {1e2, 1e4, 1e6}) {
        NGramModel model = NGramModel::train(corpus, 2, alpha);
        auto result = perplexity(model, corpus, 1, 1);
        double distance = std::abs(result.perplexity - 357.0);
        CHECK(distance < previous_distance);
        previous_distance = distance;
    }
    CHECK(previous_distance <= 1e-3);
}

TEST_CASE("in-domain n-gram beats the uniform model") {
    PreparedCorpus corpus = prepare_songs(synthetic_corpus(6, 55, 75, 12), "indomain");
    NGramModel model = NGramModel::train(corpus, 2, 0.1);
    auto trained = perplexity(model, corpus, 40, 5);
    CHECK(trained.perplexity < 357.0);
}

TEST_CASE("sampling with replacement is flagged") {
    PreparedCorpus corpus = prepare_songs(synthetic_corpus(7, 55, 75, 2), "small");
    REQUIRE(corpus.windows.size() < 100);
    UniformModel model(357);
    auto result = perplexity(model, corpus, 100, 5);
    CHECK(result.with_replacement);
    auto exact = perplexity(model, corpus, corpus.windows.size(), 5);
    CHECK(!exact.with_replacement);
}

TEST_CASE("cross matrix is directional on disjoint-pitch corpora") {
    PreparedCorpus a = prepare_songs(synthetic_corpus(8, 40, 60), "low");
    PreparedCorpus b = prepare_songs(synthetic_corpus(9, 70, 90), "high");
    NGramSpec spec{2, 0.01};
    CrossMatrix matrix = cross_matrix({{a, a}, {b, b}}, spec, 60, 17);
    REQUIRE(matrix.labels.size() == 2);
    CHECK(matrix.log_perplexity[0][1] > matrix.log_perplexity[0][0]);
    CHECK(matrix.log_perplexity[1][0] > matrix.log_perplexity[1][1]);
    // rows sorted by diagonal
    CHECK(matrix.log_perplexity[0][0] <= matrix.log_perplexity[1][1]);

    std::string csv = matrix.to_csv();
    CHECK(csv.find("train\\test") == 0);
    CHECK(csv.find("low") != std::string::npos);
}

TEST_CASE("cross matrix of a duplicated corpus is symmetric") {
    PreparedCorpus a = prepare_songs(synthetic_corpus(10, 50, 70), "dup");
    NGramSpec spec{2, 0.05};
    CrossMatrix matrix = cross_matrix({{a, a}, {a, a}}, spec, 40, 23);
    CHECK(matrix.log_perplexity[0][1] ==
          doctest::Approx(matrix.log_perplexity[1][0]).epsilon(1e-6));
    CHECK(matrix.log_perplexity[0][0] ==
          doctest::Approx(matrix.log_perplexity[1][1]).epsilon(1e-6));
}

TEST_CASE("cross matrix needs two corpora") {
    PreparedCorpus a = prepare_songs(synthetic_corpus(11, 50, 70, 4), "solo");
    CHECK_THROWS_AS(cross_matrix({{a, a}}, NGramSpec{}, 10, 1), Error);
}

TEST_CASE("unified corpus pools and stratifies") {
    PreparedCorpus a = prepare_songs(synthetic_corpus(12, 40, 60, 2), "a");
    PreparedCorpus b = prepare_songs(synthetic_corpus(13, 70, 90, 30), "b");

    PreparedCorpus pooled = unified_corpus({a, b}, UnifiedMode::concatenated, 1, 0);
    CHECK(pooled.windows.size() == a.windows.size() + b.windows.size());

    // stratified draws balance across very different corpus sizes
    PreparedCorpus stratified = unified_corpus({a, b}, UnifiedMode::stratified, 1, 10000);
    REQUIRE(stratified.windows.size() == 10000);
    std::size_t from_a = 0;
    for (const auto& window : stratified.windows) {
        bool in_a = false;
        for (const auto& wa : a.windows)
            if (wa == window) in_a = true;
        if (in_a) ++from_a;
    }
    CHECK(std::abs(double(from_a) - 5000.0) <= 150.0);  // binomial 3 sigma

    // evaluation pools are unaffected by the training mode
    PreparedCorpus test_pool_1 = unified_corpus({a, b}, UnifiedMode::concatenated, 5, 0);
    PreparedCorpus test_pool_2 = unified_corpus({a, b}, UnifiedMode::concatenated, 9, 0);
    CHECK(test_pool_1.windows == test_pool_2.windows);
}

TEST_CASE("experiment runner end to end on disk corpora") {
    testgen::TempDir low_dir("exp_low");
    testgen::TempDir high_dir("exp_high");
    std::mt19937_64 rng(21);
    std::filesystem::create_directories(low_dir.path() / "raw");
    std::filesystem::create_directories(high_dir.path() / "raw");
    for (int i = 0; i < 8; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "s%02d.mid", i);
        write_midi_file(synthetic_song(rng, 40, 60), low_dir.path() / "raw" / name);
        write_midi_file(synthetic_song(rng, 70, 90), high_dir.path() / "raw" / name);
    }
    DatasetManifest manifest;
    manifest.name = "syn";
    manifest.file_glob = "**/*.mid";
    manifest.source_format = "midi";
    manifest.sources.push_back(
        ManifestSource{"file:///dev/null", std::nullopt, ArchiveKind::none, std::nullopt});
    testgen::write_text(low_dir.path() / "manifest.json", manifest.to_json());
    testgen::write_text(high_dir.path() / "manifest.json", manifest.to_json());

    std::string config_json = std::string("{\n") +
        "  \"corpora\": [\n" +
        "    {\"name\": \"low\", \"manifest\": \"" +
        (low_dir.path() / "manifest.json").string() + "\", \"root\": \"" +
        low_dir.path().string() + "\"},\n" +
        "    {\"name\": \"high\", \"manifest\": \"" +
        (high_dir.path() / "manifest.json").string() + "\", \"root\": \"" +
        high_dir.path().string() + "\"}\n" +
        "  ],\n" +
        "  \"model\": {\"order\": 2, \"alpha\": 0.01},\n" +
        "  \"split\": {\"ratios\": [6, 1, 1], \"seed\": 3},\n" +
        "  \"sample_count\": 30,\n" +
        "  \"seed\": 5\n}";

    ExperimentConfig config = ExperimentConfig::from_json(config_json);
    ExperimentResult result = run_experiment(config);
    REQUIRE(result.matrix.labels.size() == 2);
    CHECK(result.report_json.find("\"vocabulary\": 357") != std::string::npos);

    // determinism: identical configuration, identical csv
    ExperimentResult again = run_experiment(config);
    CHECK(result.matrix.to_csv() == again.matrix.to_csv());
}
