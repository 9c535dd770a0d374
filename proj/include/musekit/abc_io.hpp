#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "musekit/diagnostics.hpp"
#include "musekit/music.hpp"

namespace musekit {

/// Fixed time base for ABC tunes: divisible by 2 and 3, so duplets and
/// triplets land on exact ticks.
inline constexpr int kAbcResolution = 24;

struct TuneSpan {
    int reference = 0;    // X: field value
    std::size_t begin = 0;
    std::size_t end = 0;  // one past the last byte of the tune
};

/// Locates every tune (each starts with an X: field). The spans partition
/// all tune text; leading free text belongs to no tune.
std::vector<TuneSpan> scan_tunes(std::string_view text);

/// Monophonic ABC subset (v1.6-2.1): notes with accidentals, octave marks
/// and length modifiers, rests, ties, tuplets, broken rhythm, bracketed
/// chords, bar lines (accidentals reset per measure), inline M:/L:/K:/Q:
/// changes. Multi-voice tunes are rejected. Decorations, grace notes and
/// chord symbols are skipped with diagnostics. One Music per tune.
std::vector<Music> read_abc(std::string_view text, Diagnostics* diag = nullptr);

std::vector<Music> read_abc_file(const std::filesystem::path& path,
                                 Diagnostics* diag = nullptr);

}  // namespace musekit
