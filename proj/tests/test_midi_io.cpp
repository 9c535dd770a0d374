#include <doctest.h>

#include <algorithm>
#include <random>

#include "musekit/midi_io.hpp"
#include "support/generators.hpp"

using namespace musekit;

namespace {

// (time, pitch, duration, velocity, program, is_drum) multiset
using NoteKey = std::tuple<Tick, int, Tick, int, int, bool>;

std::vector<NoteKey> note_multiset(const Music& music) {
    std::vector<NoteKey> keys;
    for (const auto& track : music.tracks)
        for (const auto& note : track.notes)
            keys.emplace_back(note.time, note.pitch, note.duration, note.velocity,
                              track.program, track.is_drum);
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace

TEST_CASE("read_vlq") {
    Bytes bytes{0x00};
    auto r = read_vlq(bytes, 0);
    CHECK(r.value == 0);
    CHECK(r.consumed == 1);

    bytes = {0x81, 0x48};  // (1<<7) + 0x48 = 200
    r = read_vlq(bytes, 0);
    CHECK(r.value == 200);
    CHECK(r.consumed == 2);

    bytes = {0xFF, 0xFF, 0xFF, 0x7F};
    r = read_vlq(bytes, 0);
    CHECK(r.value == 268435455);
    CHECK(r.consumed == 4);
}

TEST_CASE("read_vlq error paths") {
    Bytes unterminated{0xFF, 0xFF, 0xFF, 0xFF};
    CHECK_THROWS_AS(read_vlq(unterminated, 0), Error);
    Bytes truncated{0x81};
    CHECK_THROWS_AS(read_vlq(truncated, 0), Error);
}

TEST_CASE("vlq round-trips across the full range") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 2000; ++i) {
        auto value = std::uint32_t(bounded(rng, 1u << 28));
        Bytes bytes;
        write_vlq(value, bytes);
        auto r = read_vlq(bytes, 0);
        CHECK(r.value == value);
        CHECK(r.consumed == bytes.size());
    }
    for (std::uint32_t value : {0u, 127u, 128u, 16383u, 16384u, (1u << 28) - 1}) {
        Bytes bytes;
        write_vlq(value, bytes);
        CHECK(read_vlq(bytes, 0).value == value);
    }
}

TEST_CASE("read_midi parses a hand-assembled format-0 file") {
    // MThd, format 0, 1 track, division 96; note-on 60 vel 64 at 0, off at 96
    Bytes bytes{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 96,
                'M', 'T', 'r', 'k', 0, 0, 0, 12,
                0x00, 0x90, 0x3C, 0x40,
                0x60, 0x80, 0x3C, 0x40,
                0x00, 0xFF, 0x2F, 0x00};
    Music music = read_midi(bytes);
    CHECK(music.resolution == 96);
    REQUIRE(music.tracks.size() == 1);
    REQUIRE(music.tracks[0].notes.size() == 1);
    CHECK(music.tracks[0].notes[0] == Note{0, 60, 96, 64});
    CHECK(music.metadata.source_format == "midi");
}

TEST_CASE("read_midi decodes tempo meta events") {
    Bytes bytes{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 96,
                'M', 'T', 'r', 'k', 0, 0, 0, 11,
                0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,  // 500000 us
                0x00, 0xFF, 0x2F, 0x00};
    Music music = read_midi(bytes);
    REQUIRE(music.tempos.size() == 1);
    CHECK(music.tempos[0].qpm == doctest::Approx(120.0));
}

TEST_CASE("read_midi accepts an empty format-1 file") {
    Bytes bytes{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 1, 0, 1, 0, 96,
                'M', 'T', 'r', 'k', 0, 0, 0, 4,
                0x00, 0xFF, 0x2F, 0x00};
    Music music = read_midi(bytes);
    CHECK(end_time(music) == 0);
    CHECK(music.tracks.empty());
}

TEST_CASE("read_midi error paths") {
    Bytes bad_magic{'X', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 96};
    CHECK_THROWS_AS(read_midi(bad_magic), Error);

    Bytes smpte{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0xE7, 0x28};
    try {
        read_midi(smpte);
        FAIL("expected unsupported");
    } catch (const Error& e) {
        CHECK(e.code() == errc::unsupported);
    }

    Bytes truncated{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 96,
                    'M', 'T', 'r', 'k', 0, 0, 0, 99, 0x00};
    CHECK_THROWS_AS(read_midi(truncated), Error);
}

TEST_CASE("read_midi running status and velocity-0 note-off") {
    Bytes bytes{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 4,
                'M', 'T', 'r', 'k', 0, 0, 0, 13,
                0x00, 0x90, 0x3C, 0x40,   // on 60
                0x02, 0x3E, 0x50,         // running status: on 62
                0x02, 0x3C, 0x00,         // running status: vel 0 = off 60
                0x02, 0x3E, 0x00};        // off 62; no end-of-track meta
    Music music = read_midi(bytes);
    REQUIRE(music.tracks.size() == 1);
    auto notes = music.tracks[0].notes;
    REQUIRE(notes.size() == 2);
    CHECK(notes[0] == Note{0, 60, 4, 64});
    CHECK(notes[1] == Note{2, 62, 4, 80});
}

TEST_CASE("read_midi counts unmatched note-offs and closes dangling note-ons") {
    Bytes bytes{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 4,
                'M', 'T', 'r', 'k', 0, 0, 0, 12,
                0x00, 0x80, 0x3C, 0x40,  // orphan off
                0x00, 0x90, 0x3E, 0x50,  // on, never closed
                0x04, 0xFF, 0x2F, 0x00};
    Diagnostics diag;
    Music music = read_midi(bytes, &diag);
    CHECK(diag.counts["unmatched_note_off"] == 1);
    REQUIRE(music.tracks.size() == 1);
    CHECK(music.tracks[0].notes[0] == Note{0, 62, 4, 80});  // closed at track end
}

TEST_CASE("drum channel 9 becomes a drum track") {
    Bytes bytes{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 4,
                'M', 'T', 'r', 'k', 0, 0, 0, 12,
                0x00, 0x99, 0x24, 0x40,
                0x04, 0x89, 0x24, 0x40,
                0x00, 0xFF, 0x2F, 0x00};
    Music music = read_midi(bytes);
    REQUIRE(music.tracks.size() == 1);
    CHECK(music.tracks[0].is_drum);
}

TEST_CASE("write_midi emits a meta-only file for empty music") {
    Music music;
    Bytes bytes = write_midi(music);
    Music in = read_midi(bytes);
    CHECK(in.resolution == music.resolution);
    CHECK(in.tracks.empty());
}

TEST_CASE("write_midi puts drum tracks on channel 9") {
    Music music;
    music.tracks.push_back(Track{});
    music.tracks[0].is_drum = true;
    music.tracks[0].notes.push_back(Note{0, 36, 4, 100});
    Bytes bytes = write_midi(music);
    // the note-on for the drum track must carry channel 9
    bool saw_drum_status = false;
    for (std::size_t i = 0; i + 2 < bytes.size(); ++i)
        if (bytes[i] == 0x99 && bytes[i + 1] == 36) saw_drum_status = true;
    CHECK(saw_drum_status);
    Music in = read_midi(bytes);
    REQUIRE(in.tracks.size() == 1);
    CHECK(in.tracks[0].is_drum);
}

TEST_CASE("write_midi fails on more than 15 melodic tracks") {
    Music music;
    for (int i = 0; i < 16; ++i) {
        Track track;
        track.notes.push_back(Note{0, 60, 1, 64});
        music.tracks.push_back(track);
    }
    try {
        write_midi(music);
        FAIL("expected channel exhaustion");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("channel exhaustion") != std::string::npos);
    }
}

TEST_CASE("write then read preserves the note multiset (100 randomized cases)") {
    std::mt19937_64 rng(32);
    for (int i = 0; i < 100; ++i) {
        Music music = testgen::random_music(rng);
        Music back = read_midi(write_midi(music));
        CHECK(back.resolution == music.resolution);
        CHECK(note_multiset(back) == note_multiset(music));
    }
}

TEST_CASE("write then read preserves tempo and signature lists") {
    Music music;
    music.resolution = 24;
    music.tempos = {Tempo{0, 120.0}, Tempo{48, 60.0}};
    music.key_signatures = {KeySignature{0, 7, Mode::major},
                            KeySignature{24, 4, Mode::minor}};
    music.time_signatures = {TimeSignature{0, 3, 4}};
    Music back = read_midi(write_midi(music));
    REQUIRE(back.tempos.size() == 2);
    CHECK(back.tempos[0].qpm == doctest::Approx(120.0));
    CHECK(back.tempos[1].qpm == doctest::Approx(60.0));
    CHECK(back.key_signatures == music.key_signatures);
    CHECK(back.time_signatures == music.time_signatures);
}

TEST_CASE("parsing arbitrary bytes never crashes") {
    std::mt19937_64 rng(33);
    for (int i = 0; i < 300; ++i) {
        Bytes bytes(bounded(rng, 200));
        for (auto& b : bytes) b = std::uint8_t(rng());
        if (i % 4 == 0) {
            // bias toward plausible headers so track parsing gets exercised
            Bytes header{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0, 96,
                         'M', 'T', 'r', 'k', 0, 0, 0, std::uint8_t(bytes.size())};
            bytes.insert(bytes.begin(), header.begin(), header.end());
        }
        try {
            read_midi(bytes);
        } catch (const Error&) {
            // structured failure is fine; anything else would terminate
        }
    }
}
