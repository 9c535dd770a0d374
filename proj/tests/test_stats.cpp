#include <doctest.h>

#include <fstream>
#include <sstream>

#include "musekit/midi_io.hpp"
#include "musekit/serialization.hpp"
#include "musekit/stats.hpp"
#include "support/temp_dir.hpp"

using namespace musekit;

namespace {

Music song(double qpm, std::optional<KeySignature> key, int beats) {
    Music music;
    music.resolution = 24;
    if (qpm > 0) music.tempos.push_back(Tempo{0, qpm});
    if (key) music.key_signatures.push_back(*key);
    music.tracks.push_back(Track{});
    for (int i = 0; i < beats; ++i)
        music.tracks[0].notes.push_back(Note{Tick(i) * 24, 60, 24, 64});
    return music;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST_CASE("collect_stats walks a mixed directory") {
    testgen::TempDir dir("stats");
    write_midi_file(song(100, std::nullopt, 4), dir.path() / "a.mid");
    save_file(song(0, KeySignature{0, 0, Mode::major}, 8), dir.path() / "b.muspy.json");
    testgen::write_text(dir.path() / "tune.abc", "X:1\nL:1/4\nK:C\nCDEF\n");
    testgen::write_text(dir.path() / "notes.txt", "not music");
    testgen::write_text(dir.path() / "bad.mid", "junk");

    StatCorpus corpus = collect_stats(dir.path());
    REQUIRE(corpus.records.size() == 3);
    CHECK(corpus.failures.size() == 1);
    CHECK(corpus.failures[0].first == "bad.mid");

    // records in lexicographic path order
    CHECK(corpus.records[0].path == "a.mid");
    CHECK(corpus.records[1].path == "b.muspy.json");
    CHECK(corpus.records[2].path == "tune.abc");

    CHECK(corpus.records[0].length_ticks == 96);
    CHECK(corpus.records[0].length_quarters == doctest::Approx(4.0));
    CHECK(corpus.records[0].length_seconds == doctest::Approx(4.0 * 60.0 / 100.0));
    CHECK(corpus.records[0].initial_qpm == doctest::Approx(100.0));
    CHECK(!corpus.records[1].initial_qpm);
    REQUIRE(corpus.records[1].initial_key);
    CHECK(corpus.records[1].initial_key->root == 0);
}

TEST_CASE("histogram bin edges are explicit and counts cover every value") {
    Histogram h = Histogram::build({1.0, 2.0, 10.0, 10.0}, 5);
    REQUIRE(h.edges.size() == 6);
    CHECK(h.edges.front() == 0.0);
    CHECK(h.edges.back() == 10.0);
    std::int64_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 4);
    CHECK(h.counts.back() == 2);  // maxima land in the last bin
}

TEST_CASE("tempo report separates songs without tempo") {
    testgen::TempDir dir("stats_tempo");
    write_midi_file(song(100, std::nullopt, 4), dir.path() / "a.mid");
    save_file(song(0, std::nullopt, 4), dir.path() / "b.muspy.json");

    StatCorpus corpus = collect_stats(dir.path());
    std::string summary =
        write_stat_report(corpus, StatReportKind::tempos, dir.path() / "tempos");
    CHECK(summary.find("\"with_tempo\": 1") != std::string::npos);
    CHECK(summary.find("\"without_tempo\": 1") != std::string::npos);

    std::string hist = slurp(dir.path() / "tempos_hist.csv");
    // histogram counts sum to songs with the field present
    std::int64_t total = 0;
    std::istringstream lines(hist);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line))
        total += std::strtoll(line.substr(line.rfind(',') + 1).c_str(), nullptr, 10);
    CHECK(total == 1);
}

TEST_CASE("key report is sorted by descending count over 24 categories") {
    testgen::TempDir dir("stats_keys");
    write_midi_file(song(120, KeySignature{0, 0, Mode::major}, 2), dir.path() / "a.mid");
    write_midi_file(song(120, KeySignature{0, 0, Mode::major}, 2), dir.path() / "b.mid");
    write_midi_file(song(120, KeySignature{0, 9, Mode::minor}, 2), dir.path() / "c.mid");
    save_file(song(0, std::nullopt, 2), dir.path() / "none.muspy.json");

    StatCorpus corpus = collect_stats(dir.path());
    std::string summary =
        write_stat_report(corpus, StatReportKind::keys, dir.path() / "keys");
    CHECK(summary.find("\"without_key\": 1") != std::string::npos);

    std::string hist = slurp(dir.path() / "keys_hist.csv");
    std::istringstream lines(hist);
    std::string header, first, second;
    std::getline(lines, header);
    std::getline(lines, first);
    std::getline(lines, second);
    CHECK(first == "C major,2");
    CHECK(second == "A minor,1");
    // all 24 categories present
    int rows = 2;
    std::string line;
    while (std::getline(lines, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 24);
}

TEST_CASE("lengths report carries all three units") {
    testgen::TempDir dir("stats_len");
    write_midi_file(song(120, std::nullopt, 8), dir.path() / "a.mid");
    StatCorpus corpus = collect_stats(dir.path());
    write_stat_report(corpus, StatReportKind::lengths, dir.path() / "lengths");
    std::string records = slurp(dir.path() / "lengths.csv");
    CHECK(records.find("path,ticks,quarters,seconds") == 0);
    CHECK(records.find("a.mid,192,8.000000,4.000000") != std::string::npos);
    std::string hist = slurp(dir.path() / "lengths_hist.csv");
    CHECK(hist.find("ticks,") != std::string::npos);
    CHECK(hist.find("quarters,") != std::string::npos);
    CHECK(hist.find("seconds,") != std::string::npos);
}

TEST_CASE("empty directory is an error") {
    testgen::TempDir dir("stats_empty");
    StatCorpus corpus = collect_stats(dir.path());
    CHECK_THROWS_AS(write_stat_report(corpus, StatReportKind::lengths, dir.path() / "x"),
                    Error);
}
