#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "musekit/diagnostics.hpp"
#include "musekit/music.hpp"

namespace musekit {

/// Event-stream layout: note-on(p) = p, note-off(p) = 128 + p,
/// time-shift(t in [1,max]) = 255 + t, velocity bin b = 356 + b when
/// enabled, end-of-sequence = next id when enabled. The defaults give the
/// 388-token vocabulary; experiment() gives the 357-token variant
/// (no velocities, with end-of-sequence).
struct EventConfig {
    bool use_velocity = true;
    int velocity_bins = 32;
    int max_time_shift = 100;
    bool use_end_of_sequence = false;

    int vocabulary() const {
        return 256 + max_time_shift + (use_velocity ? velocity_bins : 0) +
               (use_end_of_sequence ? 1 : 0);
    }
    int velocity_base() const { return 256 + max_time_shift; }
    int end_of_sequence_id() const {
        return 256 + max_time_shift + (use_velocity ? velocity_bins : 0);
    }

    static EventConfig experiment() {
        return EventConfig{false, 32, 100, true};
    }

    friend bool operator==(const EventConfig&, const EventConfig&) = default;
};

enum class SequenceKind { event, pitch };

struct EncodedSequence {
    std::vector<std::int32_t> tokens;
    SequenceKind kind = SequenceKind::event;
    EventConfig config;     // meaningful for event sequences
    int resolution = 24;    // ticks per quarter of the source music
    int vocabulary = 388;
};

/// Pitch-based vocabulary: 128 note-ons, hold = 128, rest = 129.
inline constexpr int kPitchHold = 128;
inline constexpr int kPitchRest = 129;
inline constexpr int kPitchVocabulary = 130;

enum class OverlapPolicy { error, keep_highest, skip_new };

enum class PianoRollMode { binary, velocity };

/// T x 128 time-by-pitch activity matrix in row-major order.
struct PianoRoll {
    std::size_t steps = 0;
    PianoRollMode mode = PianoRollMode::binary;
    int resolution = 24;
    std::vector<std::uint8_t> cells;  // steps * 128

    std::uint8_t at(std::size_t step, int pitch) const {
        return cells[step * 128 + std::size_t(pitch)];
    }
    std::uint8_t& at(std::size_t step, int pitch) {
        return cells[step * 128 + std::size_t(pitch)];
    }
};

/// N x 4 list of (time, pitch, duration, velocity) rows.
struct NoteTable {
    std::vector<Note> rows;
    int resolution = 24;
};

EncodedSequence encode_event(const Music& music, const EventConfig& config = {});

/// Inverse of encode_event: single-track Music, note-offs matched FIFO,
/// notes still open at the end closed there, velocities reconstructed at
/// bin centers (default 64 without velocity tokens). Orphan note-offs are
/// counted in `diag`.
Music decode_event(const EncodedSequence& seq, Diagnostics* diag = nullptr);

/// One token per time step; requires monophonic music under `policy`.
/// `length` overrides the note-derived step count when given (longer
/// sequences end in rests).
EncodedSequence encode_pitch(const Music& music, OverlapPolicy policy = OverlapPolicy::error,
                             std::optional<Tick> length = std::nullopt);

Music decode_pitch(const EncodedSequence& seq);

/// Zero-duration notes occupy one step; overlapping cells take the maximum.
PianoRoll encode_pianoroll(const Music& music, PianoRollMode mode = PianoRollMode::binary);

/// Lossy inverse: maximal runs of nonzero cells per pitch become notes, so
/// back-to-back re-articulations merge.
Music decode_pianoroll(const PianoRoll& roll);

NoteTable encode_notes(const Music& music);
Music decode_notes(const NoteTable& table);

}  // namespace musekit
