#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "musekit/diagnostics.hpp"
#include "musekit/music.hpp"

namespace musekit {

/// (octave + 1) * 12 + semitone(step) + alter, semitone(C) = 0.
/// Throws when the result leaves [0, 127].
int pitch_to_midi(char step, int alter, int octave);

/// score-partwise subset: one Track per part, resolution = lcm of all
/// parts' divisions, ties merged, chord notes share the preceding onset,
/// rests/backup/forward advance the cursor, grace notes skipped with a
/// diagnostic, repeats flattened to a single pass. Tempo comes from sound
/// elements and metronome directions (the later one wins at equal ticks).
Music read_musicxml(std::string_view text, Diagnostics* diag = nullptr);

/// Compressed MusicXML container: ZIP with META-INF/container.xml naming
/// the rootfile.
Music read_mxl(std::span<const std::uint8_t> bytes, Diagnostics* diag = nullptr);

/// score-partwise writer, divisions = resolution. Notes crossing measure
/// boundaries are split and tied; polyphony is laid out with backup and
/// forward; velocities ride the note dynamics attribute.
std::string write_musicxml(const Music& music);

Music read_musicxml_file(const std::filesystem::path& path, Diagnostics* diag = nullptr);
Music read_mxl_file(const std::filesystem::path& path, Diagnostics* diag = nullptr);
void write_musicxml_file(const Music& music, const std::filesystem::path& path);

}  // namespace musekit
