#include <doctest.h>

#include <random>

#include "musekit/music.hpp"
#include "support/generators.hpp"

using namespace musekit;

namespace {

Music one_note_music(int resolution, Note note) {
    Music music;
    music.resolution = resolution;
    music.tracks.push_back(Track{});
    music.tracks[0].notes.push_back(note);
    return music;
}

}  // namespace

TEST_CASE("validate accepts in-range music") {
    CHECK(validate(one_note_music(24, Note{0, 60, 4, 64})).empty());
}

TEST_CASE("validate names the offending field") {
    auto music = one_note_music(24, Note{0, 128, 4, 64});
    auto violations = validate(music);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].field == "tracks[0].notes[0].pitch");
    CHECK(violations[0].message.find("128") != std::string::npos);

    music = one_note_music(24, Note{0, 60, 4, 64});
    music.tempos.push_back(Tempo{0, 0.0});
    violations = validate(music);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].field == "tempos[0].qpm");
}

TEST_CASE("validate covers the remaining invariants") {
    Music music;
    music.resolution = 0;
    CHECK(validate(music).size() == 1);

    music.resolution = 24;
    music.metadata.schema_version = "0.9";
    CHECK(validate(music)[0].field == "metadata.schema_version");

    music.metadata.schema_version = kSchemaVersion;
    music.key_signatures.push_back(KeySignature{0, 12, Mode::major});
    music.time_signatures.push_back(TimeSignature{-1, 4, 3});
    auto violations = validate(music);
    REQUIRE(violations.size() == 3);
    CHECK(violations[0].field == "key_signatures[0].root");
    CHECK(violations[1].field == "time_signatures[0].time");
    CHECK(violations[2].field == "time_signatures[0].denominator");

    Music chords;
    chords.tracks.push_back(Track{});
    chords.tracks[0].chords.push_back(Chord{0, {}, 4, 64});
    CHECK(validate(chords).size() == 1);
}

TEST_CASE("sort orders by time then pitch") {
    Music music;
    music.tracks.push_back(Track{});
    music.tracks[0].notes = {Note{4, 60, 1, 64}, Note{0, 60, 1, 64}};
    Music sorted = sort(music);
    CHECK(sorted.tracks[0].notes[0].time == 0);
    CHECK(sorted.tracks[0].notes[1].time == 4);

    music.tracks[0].notes = {Note{0, 64, 1, 64}, Note{0, 60, 1, 64}};
    sorted = sort(music);
    CHECK(sorted.tracks[0].notes[0].pitch == 60);
    CHECK(sorted.tracks[0].notes[1].pitch == 64);
}

TEST_CASE("sort is idempotent") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        Music music = testgen::random_music(rng);
        Music once = sort(music);
        CHECK(sort(once) == once);
    }
}

TEST_CASE("adjust_resolution rounds half up") {
    auto music = one_note_music(24, Note{24, 60, 3, 64});
    Music scaled = adjust_resolution(music, 4);
    CHECK(scaled.resolution == 4);
    CHECK(scaled.tracks[0].notes[0].time == 4);
    // 3 * 4 / 24 = 0.5 rounds up to 1
    CHECK(scaled.tracks[0].notes[0].duration == 1);
}

TEST_CASE("adjust_resolution identity and errors") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
        Music music = testgen::random_music(rng);
        CHECK(adjust_resolution(music, music.resolution) == music);
    }
    CHECK_THROWS_WITH_AS(adjust_resolution(Music{}, 0),
                         "target resolution must be >= 1, got 0", Error);
}

TEST_CASE("adjust_resolution keeps durations that round to zero") {
    auto music = one_note_music(24, Note{1, 60, 1, 64});
    Music scaled = adjust_resolution(music, 4);
    CHECK(scaled.tracks[0].notes[0].time == 0);
    CHECK(scaled.tracks[0].notes[0].duration == 0);
}

TEST_CASE("end_time") {
    CHECK(end_time(Music{}) == 0);
    CHECK(end_time(one_note_music(4, Note{4, 60, 4, 64})) == 8);
    auto music = one_note_music(4, Note{0, 60, 8, 64});
    music.tracks[0].notes.push_back(Note{4, 64, 8, 64});
    CHECK(end_time(music) == 12);
}

TEST_CASE("duration_seconds integrates the tempo map") {
    auto music = one_note_music(4, Note{0, 60, 8, 64});
    music.tempos.push_back(Tempo{0, 120.0});
    CHECK(duration_seconds(music) == doctest::Approx(1.0));

    music.tempos.clear();  // default 120 qpm
    CHECK(duration_seconds(music) == doctest::Approx(1.0));

    music.tempos = {Tempo{0, 120.0}, Tempo{4, 60.0}};
    CHECK(duration_seconds(music) == doctest::Approx(1.5));
}

TEST_CASE("duration_seconds is monotone under appended notes") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 30; ++i) {
        Music music = testgen::random_music(rng);
        if (music.tracks.empty()) music.tracks.push_back(Track{});
        double before = duration_seconds(music);
        music.tracks[0].notes.push_back(Note{end_time(music) + 3, 70, 2, 80});
        CHECK(duration_seconds(music) >= before);
    }
}
