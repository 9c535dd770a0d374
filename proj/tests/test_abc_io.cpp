#include <doctest.h>

#include "musekit/abc_io.hpp"

using namespace musekit;

namespace {

Music first(const std::string& text, Diagnostics* diag = nullptr) {
    auto tunes = read_abc(text, diag);
    REQUIRE(!tunes.empty());
    return tunes.front();
}

}  // namespace

TEST_CASE("scan_tunes") {
    CHECK(scan_tunes("").empty());

    auto spans = scan_tunes("X:1\nK:C\nC\n");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].reference == 1);
    CHECK(spans[0].begin == 0);

    std::string two = "% free text\nX:1\nK:C\nC\n\nX:2\nK:G\nG\n";
    spans = scan_tunes(two);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].reference == 1);
    CHECK(spans[1].reference == 2);
    CHECK(spans[0].end == two.find("X:2"));
    CHECK(spans[1].end == two.size());
}

TEST_CASE("a single quarter note in C") {
    Music music = first("X:1\nT:t\nM:4/4\nL:1/4\nK:C\nC");
    CHECK(music.resolution == 24);
    REQUIRE(music.tracks.size() == 1);
    REQUIRE(music.tracks[0].notes.size() == 1);
    CHECK(music.tracks[0].notes[0] == Note{0, 60, 24, 64});
    CHECK(music.metadata.title == "t");
    CHECK(music.metadata.source_format == "abc");
    REQUIRE(music.time_signatures.size() == 1);
    CHECK(music.time_signatures[0].numerator == 4);
}

TEST_CASE("unit note length arithmetic") {
    Music music = first("X:1\nM:4/4\nL:1/8\nK:C\nCD");
    REQUIRE(music.tracks[0].notes.size() == 2);
    CHECK(music.tracks[0].notes[0] == Note{0, 60, 12, 64});
    CHECK(music.tracks[0].notes[1] == Note{12, 62, 12, 64});
}

TEST_CASE("rests advance time") {
    Music music = first("X:1\nM:4/4\nL:1/8\nK:C\nz2 C");
    REQUIRE(music.tracks[0].notes.size() == 1);
    CHECK(music.tracks[0].notes[0] == Note{24, 60, 12, 64});
}

TEST_CASE("default unit length follows the meter") {
    // 4/4 >= 0.75 -> 1/8
    Music music = first("X:1\nM:4/4\nK:C\nC");
    CHECK(music.tracks[0].notes[0].duration == 12);
    // 2/4 < 0.75 -> 1/16
    music = first("X:1\nM:2/4\nK:C\nC");
    CHECK(music.tracks[0].notes[0].duration == 6);
}

TEST_CASE("length modifiers") {
    Music music = first("X:1\nL:1/8\nK:C\nC2 C/ C3/2 C//");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 4);
    CHECK(notes[0].duration == 24);
    CHECK(notes[1].duration == 6);
    CHECK(notes[2].duration == 18);
    CHECK(notes[3].duration == 3);
}

TEST_CASE("octave marks and accidentals") {
    Music music = first("X:1\nL:1/4\nK:C\nC c C, c' ^C _D =B");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 7);
    CHECK(notes[0].pitch == 60);
    CHECK(notes[1].pitch == 72);
    CHECK(notes[2].pitch == 48);
    CHECK(notes[3].pitch == 84);
    CHECK(notes[4].pitch == 61);
    CHECK(notes[5].pitch == 61);
    CHECK(notes[6].pitch == 71);
}

TEST_CASE("key signatures set accidentals and reduce to major or minor") {
    Music music = first("X:1\nL:1/4\nK:D\nF C");  // D major: F# and C#
    CHECK(music.tracks[0].notes[0].pitch == 66);
    CHECK(music.tracks[0].notes[1].pitch == 61);
    REQUIRE(music.key_signatures.size() == 1);
    CHECK(music.key_signatures[0].root == 2);
    CHECK(music.key_signatures[0].mode == Mode::major);

    music = first("X:1\nL:1/4\nK:Am\nA");
    CHECK(music.key_signatures[0].root == 9);
    CHECK(music.key_signatures[0].mode == Mode::minor);

    // A mixolydian carries the D major signature but keeps root A
    music = first("X:1\nL:1/4\nK:Amix\nF C G");
    CHECK(music.key_signatures[0].root == 9);
    CHECK(music.key_signatures[0].mode == Mode::major);
    CHECK(music.tracks[0].notes[0].pitch == 66);  // F#
    CHECK(music.tracks[0].notes[1].pitch == 61);  // C#
    CHECK(music.tracks[0].notes[2].pitch == 67);  // G natural
}

TEST_CASE("accidentals persist to the end of the measure") {
    Music music = first("X:1\nM:4/4\nL:1/4\nK:C\n^F F | F");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 3);
    CHECK(notes[0].pitch == 66);
    CHECK(notes[1].pitch == 66);  // sharp persists within the measure
    CHECK(notes[2].pitch == 65);  // reset at the bar line
}

TEST_CASE("ties merge consecutive same-pitch notes") {
    Music music = first("X:1\nL:1/8\nK:C\nC2-C2 D");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 2);
    CHECK(notes[0] == Note{0, 60, 48, 64});
    CHECK(notes[1] == Note{48, 62, 12, 64});
}

TEST_CASE("tuplets scale durations") {
    Music music = first("X:1\nM:4/4\nL:1/8\nK:C\n(3CDE F");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 4);
    CHECK(notes[0] == Note{0, 60, 8, 64});
    CHECK(notes[1] == Note{8, 62, 8, 64});
    CHECK(notes[2] == Note{16, 64, 8, 64});
    CHECK(notes[3] == Note{24, 65, 12, 64});
}

TEST_CASE("broken rhythm") {
    Music music = first("X:1\nL:1/8\nK:C\nC>D E<F");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 4);
    CHECK(notes[0] == Note{0, 60, 18, 64});
    CHECK(notes[1] == Note{18, 62, 6, 64});
    CHECK(notes[2] == Note{24, 64, 6, 64});
    CHECK(notes[3] == Note{30, 65, 18, 64});
}

TEST_CASE("bracketed chords emit simultaneous notes") {
    Music music = first("X:1\nL:1/8\nK:C\n[CEG]2 D");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 4);
    CHECK(notes[0] == Note{0, 60, 24, 64});
    CHECK(notes[1] == Note{0, 64, 24, 64});
    CHECK(notes[2] == Note{0, 67, 24, 64});
    CHECK(notes[3] == Note{24, 62, 12, 64});
}

TEST_CASE("inline fields change state mid-tune") {
    Music music = first("X:1\nL:1/8\nK:C\nF[K:D]F[L:1/4]F");
    auto& notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 3);
    CHECK(notes[0].pitch == 65);
    CHECK(notes[1].pitch == 66);
    CHECK(notes[2].duration == 24);
    CHECK(music.key_signatures.size() == 2);
}

TEST_CASE("tempo field forms") {
    Music music = first("X:1\nL:1/4\nQ:1/4=120\nK:C\nC");
    REQUIRE(music.tempos.size() == 1);
    CHECK(music.tempos[0].qpm == doctest::Approx(120.0));

    // plain number counts unit note lengths per minute
    music = first("X:1\nL:1/8\nQ:120\nK:C\nC");
    REQUIRE(music.tempos.size() == 1);
    CHECK(music.tempos[0].qpm == doctest::Approx(60.0));

    Diagnostics diag;
    music = first("X:1\nL:1/8\nQ:\"Allegro\"\nK:C\nC", &diag);
    CHECK(music.tempos.empty());
    CHECK(diag.counts["tempo_unrecognized"] == 1);
}

TEST_CASE("decorations, grace notes and chord symbols are skipped with diagnostics") {
    Diagnostics diag;
    Music music = first("X:1\nL:1/8\nK:C\n\"Am\"C {DE}F !trill!G .A\n", &diag);
    CHECK(music.tracks[0].notes.size() == 4);
    CHECK(diag.counts["chord_symbol_skipped"] == 1);
    CHECK(diag.counts["grace_notes_skipped"] == 1);
    CHECK(diag.counts["decoration_skipped"] == 2);
}

TEST_CASE("error paths") {
    try {
        read_abc("X:1\nT:no key\nC D E\n");
        FAIL("expected schema error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::schema);
        CHECK(std::string(e.what()).find("K:") != std::string::npos);
    }

    try {
        read_abc("X:7\nK:C\nC#D\n");  // '#' is not a valid body token
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::parse);
        CHECK(std::string(e.what()).find("X:7") != std::string::npos);
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }

    try {
        read_abc("X:1\nV:1\nK:C\nC\n");
        FAIL("expected unsupported");
    } catch (const Error& e) {
        CHECK(e.code() == errc::unsupported);
    }
}

TEST_CASE("duration conservation: note and rest spans sum to the elapsed ticks") {
    Diagnostics diag;
    Music music = first("X:1\nM:6/8\nL:1/8\nK:D\nA>B (3ABc z2 [DF]2 d2-d2 Z\n", &diag);
    // elapsed ticks = last event end; notes partition their spans exactly
    Tick elapsed = 0;
    for (const auto& note : music.tracks[0].notes)
        elapsed = std::max(elapsed, note.end());
    CHECK(end_time(music) == elapsed);
    CHECK(validate(music).empty());
}

TEST_CASE("multiple tunes in one file") {
    auto tunes = read_abc("X:1\nT:first\nK:C\nCDEF\n\nX:2\nT:second\nK:G\nGABc\n");
    REQUIRE(tunes.size() == 2);
    CHECK(tunes[0].metadata.title == "first");
    CHECK(tunes[1].metadata.title == "second");
    CHECK(tunes[1].tracks[0].notes[0].pitch == 67);
}

TEST_CASE("all parsed tunes validate") {
    auto tunes = read_abc(
        "X:1\nM:C\nL:1/8\nK:Dm\nDE FG | A2 d2 | (3ddd c2 | D4 |]\n"
        "\nX:2\nM:C|\nK:Bb\nB,2 B2 | [Bd]4 |\n");
    for (const auto& music : tunes) CHECK(validate(music).empty());
}
