#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "musekit/diagnostics.hpp"
#include "musekit/music.hpp"

namespace musekit {

using Bytes = std::vector<std::uint8_t>;

struct VlqResult {
    std::uint32_t value;
    std::size_t consumed;
};

/// Decodes one variable-length quantity (big-endian 7-bit groups, at most
/// 4 bytes, so values < 2^28) starting at `offset`.
VlqResult read_vlq(std::span<const std::uint8_t> bytes, std::size_t offset);

/// Appends the VLQ encoding of `value` (< 2^28).
void write_vlq(std::uint32_t value, Bytes& out);

/// Standard MIDI File reader, formats 0 and 1, ticks-per-quarter division
/// only. One Track per (file track, channel) pair that carries notes;
/// channel 9 is drums. Note-offs match the earliest unmatched note-on of
/// the same pitch and channel; note-on with velocity 0 is a note-off;
/// unmatched note-ons are closed at track end; running status honored.
/// Recoverable oddities (unmatched note-offs, skipped sysex, ...) are
/// counted in `diag` when given.
Music read_midi(std::span<const std::uint8_t> bytes, Diagnostics* diag = nullptr);

/// Writes a format-1 SMF: a meta track with tempo/key/time-signature
/// events, then one track per Track. Drums go to channel 9, melodic
/// tracks round-robin over the other 15 channels (more melodic tracks
/// than that is an error). Velocity-0 notes are emitted with velocity 1
/// because SMF reserves note-on velocity 0 for note-off.
Bytes write_midi(const Music& music);

Music read_midi_file(const std::filesystem::path& path, Diagnostics* diag = nullptr);
void write_midi_file(const Music& music, const std::filesystem::path& path);

}  // namespace musekit
