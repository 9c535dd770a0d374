#include <doctest.h>

#include <cmath>
#include <random>

#include "archive.hpp"
#include "glob.hpp"
#include "musekit/datasets.hpp"
#include "musekit/midi_io.hpp"
#include "musekit/serialization.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace musekit;

namespace {

Music tiny_music(int pitch) {
    Music music;
    music.resolution = 4;
    music.tracks.push_back(Track{});
    music.tracks[0].notes.push_back(Note{0, pitch, 4, 64});
    return music;
}

DatasetManifest midi_manifest(const std::string& name = "fixture") {
    DatasetManifest manifest;
    manifest.name = name;
    manifest.file_glob = "**/*.mid";
    manifest.source_format = "midi";
    manifest.sources.push_back(ManifestSource{"file:///dev/null", std::nullopt,
                                              ArchiveKind::none, std::nullopt});
    return manifest;
}

// a raw corpus of n valid MIDI files (and optionally one corrupt file)
CorpusHandle make_corpus(const testgen::TempDir& dir, int files, bool with_corrupt,
                         const std::string& name = "fixture") {
    std::filesystem::create_directories(dir.path() / "raw");
    for (int i = 0; i < files; ++i) {
        char buffer[16];
        std::snprintf(buffer, sizeof buffer, "song%03d.mid", i);
        write_midi_file(tiny_music(40 + i % 60), dir.path() / "raw" / buffer);
    }
    if (with_corrupt) testgen::write_text(dir.path() / "raw" / "broken.mid", "not midi");
    return CorpusHandle{dir.path(), CorpusMode::on_the_fly, midi_manifest(name)};
}

}  // namespace

TEST_CASE("glob matching") {
    CHECK(glob_match("*.mid", "a.mid"));
    CHECK(!glob_match("*.mid", "a.midi"));
    CHECK(!glob_match("*.mid", "dir/a.mid"));
    CHECK(glob_match("**/*.mid", "dir/sub/a.mid"));
    CHECK(glob_match("**/*.mid", "a.mid"));
    CHECK(glob_match("data/**/*.abc", "data/x/y/z.abc"));
    CHECK(glob_match("*.{xml,mxl}", "a.xml"));
    CHECK(glob_match("*.{xml,mxl}", "a.mxl"));
    CHECK(!glob_match("*.{xml,mxl}", "a.mid"));
    CHECK(glob_match("song?.mid", "song1.mid"));
    CHECK(!glob_match("song?.mid", "song12.mid"));
}

TEST_CASE("manifest json round-trip and validation") {
    const char* text = R"({
  "name": "demo",
  "source_format": "midi",
  "file_glob": "**/*.mid",
  "license_note": "research use",
  "unverified": true,
  "preprocess": {"discard_repeats": true, "melody_only": false},
  "annotations": {"genre": "folk"},
  "sources": [{"url": "https://example.org/x.zip", "sha256": null, "archive": "zip"}]
})";
    DatasetManifest manifest = DatasetManifest::from_json(text);
    CHECK(manifest.name == "demo");
    CHECK(manifest.unverified);
    CHECK(manifest.preprocess.discard_repeats);
    CHECK(manifest.annotations.at("genre") == "folk");
    CHECK(manifest.sources[0].archive == ArchiveKind::zip);
    CHECK(manifest.sources[0].local_name() == "x.zip");
    DatasetManifest again = DatasetManifest::from_json(manifest.to_json());
    CHECK(again.name == manifest.name);
    CHECK(again.sources[0].url == manifest.sources[0].url);

    CHECK_THROWS_AS(DatasetManifest::from_json("{\"name\": \"x\"}"), Error);
    CHECK_THROWS_AS(DatasetManifest::from_json(
                        "{\"name\": \"x\", \"file_glob\": \"*\", \"source_format\": "
                        "\"wav\", \"sources\": [{\"url\": \"u\"}]}"),
                    Error);
}

TEST_CASE("download fetches, verifies, extracts and is idempotent") {
    testgen::TempDir source_dir("dl_src");
    testgen::TempDir corpus_dir("dl_dst");

    // a zip archive with two midi files
    Bytes a = write_midi(tiny_music(60)), b = write_midi(tiny_music(64));
    auto zipped = archive::write_zip_stored({{"songs/a.mid", a}, {"songs/b.mid", b}});
    testgen::write_bytes(source_dir.path() / "corpus.zip", zipped);

    DatasetManifest manifest = midi_manifest();
    manifest.sources.clear();
    manifest.sources.push_back(ManifestSource{
        "file://" + (source_dir.path() / "corpus.zip").string(), std::nullopt,
        ArchiveKind::zip, std::nullopt});

    DownloadReport report = download(manifest, corpus_dir.path());
    CHECK(report.fetched.size() == 1);
    CHECK(report.files_extracted == 2);
    CHECK(std::filesystem::is_regular_file(corpus_dir.path() / "raw/songs/a.mid"));

    // rerun: nothing fetched or re-extracted
    DownloadReport again = download(manifest, corpus_dir.path());
    CHECK(again.bytes_transferred == 0);
    CHECK(again.fetched.empty());
    CHECK(again.files_extracted == 0);
}

TEST_CASE("download verifies pinned checksums") {
    testgen::TempDir source_dir("dl2_src");
    testgen::TempDir corpus_dir("dl2_dst");
    testgen::write_text(source_dir.path() / "data.mid", "payload");

    DatasetManifest manifest = midi_manifest();
    manifest.sources.clear();
    manifest.sources.push_back(ManifestSource{
        "file://" + (source_dir.path() / "data.mid").string(),
        std::string("0000000000000000000000000000000000000000000000000000000000000000"),
        ArchiveKind::none, std::nullopt});
    try {
        download(manifest, corpus_dir.path());
        FAIL("expected integrity error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::integrity);
        CHECK(std::string(e.what()).find("data.mid") != std::string::npos);
    }
}

TEST_CASE("download reports transfer errors with the url") {
    testgen::TempDir corpus_dir("dl3_dst");
    DatasetManifest manifest = midi_manifest();
    manifest.sources.clear();
    manifest.sources.push_back(ManifestSource{"file:///nonexistent/nowhere.zip",
                                              std::nullopt, ArchiveKind::zip,
                                              std::nullopt});
    try {
        download(manifest, corpus_dir.path());
        FAIL("expected transfer error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::transfer);
        CHECK(std::string(e.what()).find("nowhere.zip") != std::string::npos);
    }
}

TEST_CASE("convert writes canonical documents and skips corrupt files") {
    testgen::TempDir dir("convert");
    CorpusHandle handle = make_corpus(dir, 3, true);

    ConvertReport report = convert(handle);
    CHECK(report.matched == 4);
    CHECK(report.converted == 3);
    CHECK(report.skipped_unparseable == 1);
    CHECK(std::filesystem::is_regular_file(dir.path() /
                                           "converted/song000.mid.muspy.json"));
    CHECK(std::filesystem::is_regular_file(dir.path() / ".converted.json"));

    // rerun converts nothing
    ConvertReport again = convert(handle);
    CHECK(again.converted == 0);
    CHECK(again.skipped_unchanged == 3);
    CHECK(again.skipped_unparseable == 1);

    // a changed file is reconverted
    write_midi_file(tiny_music(99), dir.path() / "raw" / "song001.mid");
    ConvertReport third = convert(handle);
    CHECK(third.converted == 1);
    CHECK(third.skipped_unchanged == 2);
}

TEST_CASE("convert errors on empty corpora") {
    testgen::TempDir dir("convert_empty");
    std::filesystem::create_directories(dir.path() / "raw");
    CorpusHandle handle{dir.path(), CorpusMode::on_the_fly, midi_manifest()};
    try {
        convert(handle);
        FAIL("expected empty-corpus error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::config);
        CHECK(std::string(e.what()).find("empty corpus") != std::string::npos);
    }

    // wrong source format: everything matched but nothing parses
    testgen::TempDir dir2("convert_wrong");
    testgen::write_text(dir2.path() / "raw" / "a.mid", "X:1\nK:C\nC\n");
    CorpusHandle wrong{dir2.path(), CorpusMode::on_the_fly, midi_manifest()};
    try {
        convert(wrong);
        FAIL("expected empty-corpus error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::config);
    }
}

TEST_CASE("on-the-fly and preconverted iteration are equivalent") {
    testgen::TempDir dir("modes");
    CorpusHandle on_the_fly = make_corpus(dir, 4, true);
    convert(on_the_fly);
    CorpusHandle preconverted = on_the_fly;
    preconverted.mode = CorpusMode::preconverted;

    auto lazy = iterate_all(on_the_fly);
    auto converted = iterate_all(preconverted);
    REQUIRE(lazy.size() == 5);
    REQUIRE(converted.size() == 5);
    for (std::size_t i = 0; i < lazy.size(); ++i) {
        CHECK(lazy[i].path == converted[i].path);
        CHECK(lazy[i].ok() == converted[i].ok());
        if (lazy[i].ok()) CHECK(*lazy[i].music == *converted[i].music);
    }
    // the corrupt file yields an error item in both modes, mid-stream
    CHECK(!lazy[0].ok());  // "broken.mid" sorts first
    CHECK(lazy[1].ok());
}

TEST_CASE("preconverted mode requires the marker") {
    testgen::TempDir dir("no_marker");
    make_corpus(dir, 2, false);
    CorpusHandle handle{dir.path(), CorpusMode::preconverted, midi_manifest()};
    try {
        CorpusIterator it(handle);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::config);
    }
}

TEST_CASE("iterating an empty directory yields an empty stream") {
    testgen::TempDir dir("empty_iter");
    std::filesystem::create_directories(dir.path() / "raw");
    CorpusHandle handle{dir.path(), CorpusMode::on_the_fly, midi_manifest()};
    CHECK(iterate_all(handle).empty());
}

TEST_CASE("split: sizes, determinism, largest remainder") {
    testgen::TempDir dir("split10");
    CorpusHandle handle = make_corpus(dir, 10, false);
    DatasetSplit s = split(handle, {8, 1, 1}, 42);
    CHECK(s.parts[0].size() == 8);
    CHECK(s.parts[1].size() == 1);
    CHECK(s.parts[2].size() == 1);

    DatasetSplit t = split(handle, {8, 1, 1}, 42);
    CHECK(s.parts == t.parts);
    DatasetSplit u = split(handle, {8, 1, 1}, 43);
    CHECK(s.parts != u.parts);

    // parts are disjoint and exhaustive
    std::vector<std::string> all;
    for (const auto& part : s.parts) all.insert(all.end(), part.begin(), part.end());
    std::sort(all.begin(), all.end());
    CHECK(all == CorpusIterator(handle).keys());

    // round-trips through json
    DatasetSplit back = DatasetSplit::from_json(s.to_json());
    CHECK(back.parts == s.parts);
    CHECK(back.seed == s.seed);
}

TEST_CASE("split of 100 files at 8:1:1") {
    testgen::TempDir dir("split100");
    CorpusHandle handle = make_corpus(dir, 100, false);
    DatasetSplit s = split(handle, {8, 1, 1}, 7);
    CHECK(s.parts[0].size() == 80);
    CHECK(s.parts[1].size() == 10);
    CHECK(s.parts[2].size() == 10);
}

TEST_CASE("split error paths") {
    testgen::TempDir dir("split_small");
    CorpusHandle handle = make_corpus(dir, 2, false);
    CHECK_THROWS_AS(split(handle, {8, 1, 1}, 1), Error);
    testgen::TempDir dir2("split_ratio");
    CorpusHandle handle2 = make_corpus(dir2, 10, false);
    CHECK_THROWS_AS(split(handle2, {8, 0, 1}, 1), Error);
}

TEST_CASE("stratified draws are corpus-uniform") {
    testgen::TempDir small_dir("strat_small");
    testgen::TempDir large_dir("strat_large");
    CorpusHandle small = make_corpus(small_dir, 1, false, "small");
    CorpusHandle large = make_corpus(large_dir, 100, false, "large");

    auto draws = stratified_draws({small, large}, 99, 10000);
    std::size_t small_draws = 0;
    for (const auto& [corpus, file] : draws)
        if (corpus == 0) ++small_draws;
    // binomial(10000, 0.5): 3 sigma = 150
    CHECK(std::abs(double(small_draws) - 5000.0) <= 150.0);

    // deterministic for a fixed seed
    CHECK(draws == stratified_draws({small, large}, 99, 10000));
    CHECK(stratified_draws({small, large}, 1, 0).empty());
}

TEST_CASE("stratified sampling rejects empty corpora and yields music") {
    testgen::TempDir dir("strat_one");
    CorpusHandle corpus = make_corpus(dir, 3, false);
    testgen::TempDir empty_dir("strat_empty");
    std::filesystem::create_directories(empty_dir.path() / "raw");
    CorpusHandle empty{empty_dir.path(), CorpusMode::on_the_fly, midi_manifest("empty")};

    CHECK_THROWS_AS(stratified_draws({corpus, empty}, 1, 10), Error);

    StratifiedSampler sampler({corpus}, 5, 20);
    std::size_t produced = 0;
    while (auto item = sampler.next()) {
        CHECK(item->ok());
        ++produced;
    }
    CHECK(produced == 20);
}
