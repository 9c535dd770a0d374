#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "musekit/error.hpp"

namespace musekit {

/// Integer time unit; `resolution` ticks make one quarter note.
using Tick = std::int64_t;

/// Format version embedded in every canonical document.
inline constexpr const char* kSchemaVersion = "1.0";

inline constexpr const char* kSourceFormats[] = {"midi", "musicxml", "abc", "muspy"};

struct Metadata {
    std::string schema_version = kSchemaVersion;
    std::optional<std::string> title;
    std::vector<std::string> creators;
    std::optional<std::string> copyright;
    std::optional<std::string> collection;
    std::optional<std::string> source_filename;
    std::optional<std::string> source_format;

    friend bool operator==(const Metadata&, const Metadata&) = default;
};

struct Tempo {
    Tick time = 0;
    double qpm = 120.0;  // quarter notes per minute

    friend bool operator==(const Tempo&, const Tempo&) = default;
};

enum class Mode { major, minor };

const char* mode_name(Mode mode);

struct KeySignature {
    Tick time = 0;
    int root = 0;  // pitch class, 0 = C
    Mode mode = Mode::major;

    friend bool operator==(const KeySignature&, const KeySignature&) = default;
};

struct TimeSignature {
    Tick time = 0;
    int numerator = 4;
    int denominator = 4;  // power of two, <= 64

    friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

struct Note {
    Tick time = 0;      // onset
    int pitch = 60;     // MIDI number
    Tick duration = 0;
    int velocity = 64;

    Tick end() const { return time + duration; }

    friend bool operator==(const Note&, const Note&) = default;
    friend auto operator<=>(const Note&, const Note&) = default;
};

struct Chord {
    Tick time = 0;
    std::vector<int> pitches;  // non-empty
    Tick duration = 0;
    int velocity = 64;

    friend bool operator==(const Chord&, const Chord&) = default;
};

struct Lyric {
    Tick time = 0;
    std::string text;

    friend bool operator==(const Lyric&, const Lyric&) = default;
};

struct Track {
    int program = 0;  // General MIDI program, 0-127
    bool is_drum = false;
    std::optional<std::string> name;
    std::vector<Note> notes;
    std::vector<Chord> chords;
    std::vector<Lyric> lyrics;

    friend bool operator==(const Track&, const Track&) = default;
};

/// The canonical in-memory music container every reader produces and every
/// writer, codec and metric consumes. Plain value type: copy freely, share
/// const references between workers.
struct Music {
    Metadata metadata;
    int resolution = 24;  // ticks per quarter note
    std::vector<Tempo> tempos;
    std::vector<KeySignature> key_signatures;
    std::vector<TimeSignature> time_signatures;
    std::vector<Track> tracks;

    friend bool operator==(const Music&, const Music&) = default;
};

/// Collects every broken invariant; empty result means the Music is valid.
std::vector<Violation> validate(const Music& music);

/// Throws ValidationError unless validate(music) is empty.
void ensure_valid(const Music& music);

/// Stable time ordering for every event list; notes tie-break by ascending
/// pitch so equal inputs serialize byte-identically. Idempotent.
Music sort(Music music);

/// Rescales every time and duration to `target` ticks per quarter with
/// round-half-up. Durations may round to 0 and are kept.
Music adjust_resolution(Music music, int target);

/// Largest note end over all tracks; 0 for note-less music.
Tick end_time(const Music& music);

/// Piecewise integration over the tempo map from tick 0 to end_time.
/// 120 qpm applies before the first tempo event (and throughout when the
/// tempo list is empty).
double duration_seconds(const Music& music);

}  // namespace musekit
