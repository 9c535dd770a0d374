#pragma once

#include <map>
#include <optional>
#include <string>

#include "musekit/music.hpp"

namespace musekit {

// Conventions shared by every metric: chords are ignored; the step grid is
// the per-tick sounding-pitch multiset of non-drum notes (zero-duration
// notes sound for one tick); drum tracks feed only the two drum metrics;
// entropies are Shannon base 2; minor means natural minor. Metrics return
// nullopt where the quantity is undefined (e.g. empty music).

std::optional<double> polyphony(const Music& music);
std::optional<double> polyphony_rate(const Music& music, int threshold = 2);
std::optional<double> pitch_in_scale_rate(const Music& music, int root, Mode mode);
std::optional<double> scale_consistency(const Music& music);
std::optional<double> pitch_entropy(const Music& music);
std::optional<double> pitch_class_entropy(const Music& music);

enum class EmptyBeatMode { onset, sounding };

/// Beats are [k*r, (k+1)*r) up to ceil(end_time / r). `onset` counts a beat
/// empty when no note starts in it; `sounding` when nothing sounds in it.
std::optional<double> empty_beat_rate(const Music& music,
                                      EmptyBeatMode mode = EmptyBeatMode::onset);

enum class MeterKind { duple, triple };

/// Fraction of drum onsets on the r/2 (duple) or r/3 (triple) grid.
/// Resolution must be divisible by 6.
std::optional<double> drum_in_pattern_rate(const Music& music, MeterKind meter);
std::optional<double> drum_pattern_consistency(const Music& music);

/// Mean similarity of adjacent per-measure onset vectors:
/// 1 - mean hamming distance / measure_len. Needs at least two measures.
std::optional<double> groove_consistency(const Music& music, Tick measure_len);

/// Every metric at its default parameters plus the parameters used; the
/// key signature for pitch_in_scale_rate comes from the music's first key
/// signature and the groove measure length from its first time signature
/// (4/4 assumed otherwise).
struct MetricReport {
    std::map<std::string, std::optional<double>> values;
    std::map<std::string, std::string> reasons;     // why a value is undefined
    std::map<std::string, std::string> parameters;  // self-describing choices

    std::string to_json() const;
};

MetricReport evaluate_all(const Music& music);

}  // namespace musekit
