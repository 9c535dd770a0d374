// Drives the installed binary as a subprocess: exit codes, file outputs,
// determinism.

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "musekit/midi_io.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace musekit;

namespace {

std::string cli_path() { return MUSEKIT_CLI_PATH; }

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& arguments, const std::filesystem::path& capture) {
    std::string command = cli_path() + " " + arguments + " >" + capture.string() + " 2>&1";
    int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(capture, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    result.output = buffer.str();
    return result;
}

void put_midi(const Music& music, const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    write_midi_file(music, path);
}

Music demo_music() {
    Music music;
    music.resolution = 24;
    music.tempos.push_back(Tempo{0, 100.0});
    music.tracks.push_back(Track{});
    for (int i = 0; i < 8; ++i)
        music.tracks[0].notes.push_back(Note{Tick(i) * 12, 60 + i, 12, 80});
    return music;
}

}  // namespace

TEST_CASE("convert: success and failure exit codes") {
    testgen::TempDir dir("cli_convert");
    auto capture = dir.path() / "out.txt";
    put_midi(demo_music(), dir.path() / "a.mid");

    auto ok = run("convert " + (dir.path() / "a.mid").string() + " " +
                      (dir.path() / "a.muspy.json").string(),
                  capture);
    CHECK(ok.exit_code == 0);
    CHECK(std::filesystem::is_regular_file(dir.path() / "a.muspy.json"));

    testgen::write_text(dir.path() / "tune.abc", "X:1\nL:1/8\nK:C\nCDEF|\n");
    auto abc = run("convert " + (dir.path() / "tune.abc").string() + " " +
                       (dir.path() / "tune.mid").string(),
                   capture);
    CHECK(abc.exit_code == 0);

    auto usage = run("convert " + (dir.path() / "a.xyz").string() + " " +
                         (dir.path() / "b.mid").string(),
                     capture);
    CHECK(usage.exit_code == 2);

    testgen::write_text(dir.path() / "bad.mid", "junk");
    auto parse = run("convert " + (dir.path() / "bad.mid").string() + " " +
                         (dir.path() / "bad.muspy.json").string(),
                     capture);
    CHECK(parse.exit_code == 1);
    CHECK(parse.output.find("error:") != std::string::npos);
}

TEST_CASE("convert honors --resolution") {
    testgen::TempDir dir("cli_res");
    auto capture = dir.path() / "out.txt";
    put_midi(demo_music(), dir.path() / "a.mid");
    auto ok = run("convert --resolution 4 " + (dir.path() / "a.mid").string() + " " +
                      (dir.path() / "a.muspy.json").string(),
                  capture);
    CHECK(ok.exit_code == 0);
    std::ifstream in(dir.path() / "a.muspy.json");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    CHECK(buffer.str().find("\"resolution\": 4") != std::string::npos);
}

TEST_CASE("metrics emits a json report") {
    testgen::TempDir dir("cli_metrics");
    auto capture = dir.path() / "out.txt";
    put_midi(demo_music(), dir.path() / "a.mid");
    auto result = run("metrics " + (dir.path() / "a.mid").string(), capture);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("\"polyphony\"") != std::string::npos);

    // directory mode merges per-file reports
    put_midi(demo_music(), dir.path() / "corpus" / "b.mid");
    put_midi(demo_music(), dir.path() / "corpus" / "c.mid");
    auto merged = run("metrics " + (dir.path() / "corpus").string(), capture);
    CHECK(merged.exit_code == 0);
    CHECK(merged.output.find("\"b.mid\"") != std::string::npos);
    CHECK(merged.output.find("\"c.mid\"") != std::string::npos);
}

TEST_CASE("encode writes token files") {
    testgen::TempDir dir("cli_encode");
    auto capture = dir.path() / "out.txt";
    put_midi(demo_music(), dir.path() / "a.mid");
    auto result = run("encode " + (dir.path() / "a.mid").string() +
                          " --repr event --experiment --out " +
                          (dir.path() / "tokens.txt").string(),
                      capture);
    CHECK(result.exit_code == 0);
    std::ifstream tokens(dir.path() / "tokens.txt");
    int token = -1;
    bool in_range = true;
    int count = 0;
    while (tokens >> token) {
        ++count;
        if (token < 0 || token >= 357) in_range = false;
    }
    CHECK(count > 8);
    CHECK(in_range);

    auto usage = run("encode " + (dir.path() / "a.mid").string() + " --repr wat", capture);
    CHECK(usage.exit_code == 2);
}

TEST_CASE("stats writes record and histogram csvs") {
    testgen::TempDir dir("cli_stats");
    auto capture = dir.path() / "out.txt";
    put_midi(demo_music(), dir.path() / "corpus" / "a.mid");
    put_midi(demo_music(), dir.path() / "corpus" / "b.mid");
    auto result = run("stats " + (dir.path() / "corpus").string() +
                          " --report tempos --out-prefix " + (dir.path() / "tempos").string(),
                      capture);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("\"with_tempo\": 2") != std::string::npos);
    CHECK(std::filesystem::is_regular_file(dir.path() / "tempos.csv"));
    CHECK(std::filesystem::is_regular_file(dir.path() / "tempos_hist.csv"));

    auto empty = run("stats " + (dir.path() / "nowhere").string() +
                         " --report keys --out-prefix " + (dir.path() / "keys").string(),
                     capture);
    CHECK(empty.exit_code == 1);
}

TEST_CASE("dataset split is deterministic per seed") {
    testgen::TempDir dir("cli_split");
    auto capture = dir.path() / "out.txt";
    for (int i = 0; i < 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "s%02d.mid", i);
        put_midi(demo_music(), dir.path() / "corpus" / "raw" / name);
    }
    testgen::write_text(dir.path() / "m.json", R"({
  "name": "mini",
  "source_format": "midi",
  "file_glob": "**/*.mid",
  "license_note": "fixture",
  "sources": [{"url": "file:///dev/null", "sha256": null, "archive": "none"}]
})");
    std::string base = "dataset split " + (dir.path() / "m.json").string() + " --root " +
                       (dir.path() / "corpus").string() + " --ratios 8:1:1 --seed 77";
    auto first = run(base, capture);
    auto second = run(base, capture);
    CHECK(first.exit_code == 0);
    CHECK(first.output == second.output);
    CHECK(first.output.find("\"train\"") != std::string::npos);
}

TEST_CASE("experiment produces identical csvs for the same seed") {
    testgen::TempDir dir("cli_exp");
    auto capture = dir.path() / "out.txt";
    std::mt19937_64 rng(5);
    for (int c = 0; c < 2; ++c) {
        std::string corpus = c == 0 ? "low" : "high";
        for (int i = 0; i < 6; ++i) {
            Music music;
            music.resolution = 4;
            music.tracks.push_back(Track{});
            Tick cursor = 0;
            for (int k = 0; k < 40; ++k) {
                Tick dur = 1 + Tick(bounded(rng, 3));
                int base = c == 0 ? 40 : 70;
                music.tracks[0].notes.push_back(
                    Note{cursor, base + int(bounded(rng, 20)), dur, 64});
                cursor += dur;
            }
            char name[32];
            std::snprintf(name, sizeof name, "s%02d.mid", i);
            put_midi(music, dir.path() / corpus / "raw" / name);
        }
        testgen::write_text(dir.path() / (corpus + ".json"), R"({
  "name": ")" + corpus + R"(",
  "source_format": "midi",
  "file_glob": "**/*.mid",
  "license_note": "fixture",
  "sources": [{"url": "file:///dev/null", "sha256": null, "archive": "none"}]
})");
    }
    testgen::write_text(dir.path() / "config.json", std::string(R"({
  "corpora": [
    {"name": "low", "manifest": ")") + (dir.path() / "low.json").string() +
        R"(", "root": ")" + (dir.path() / "low").string() + R"("},
    {"name": "high", "manifest": ")" + (dir.path() / "high.json").string() +
        R"(", "root": ")" + (dir.path() / "high").string() + R"("}
  ],
  "model": {"order": 2, "alpha": 0.05},
  "split": {"ratios": [4, 1, 1], "seed": 2},
  "sample_count": 20,
  "seed": 9
})");

    std::string base = "experiment " + (dir.path() / "config.json").string() +
                       " --out-csv ";
    auto first = run(base + (dir.path() / "m1.csv").string(), capture);
    auto second = run(base + (dir.path() / "m2.csv").string(), capture);
    REQUIRE(first.exit_code == 0);
    REQUIRE(second.exit_code == 0);
    std::ifstream m1(dir.path() / "m1.csv"), m2(dir.path() / "m2.csv");
    std::ostringstream b1, b2;
    b1 << m1.rdbuf();
    b2 << m2.rdbuf();
    CHECK(b1.str() == b2.str());
    CHECK(b1.str().find("train\\test") == 0);
}

TEST_CASE("bad arguments exit 2") {
    testgen::TempDir dir("cli_usage");
    auto capture = dir.path() / "out.txt";
    CHECK(run("frobnicate", capture).exit_code == 2);
    CHECK(run("metrics", capture).exit_code == 2);
    CHECK(run("dataset explode m.json --root x", capture).exit_code == 2);
}
