#include "musekit/metrics.hpp"

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <json.hpp>
#include <vector>

namespace musekit {

namespace {

std::vector<Note> melodic_notes(const Music& music) {
    std::vector<Note> notes;
    for (const auto& track : music.tracks)
        if (!track.is_drum)
            notes.insert(notes.end(), track.notes.begin(), track.notes.end());
    return notes;
}

std::vector<Note> drum_notes(const Music& music) {
    std::vector<Note> notes;
    for (const auto& track : music.tracks)
        if (track.is_drum)
            notes.insert(notes.end(), track.notes.begin(), track.notes.end());
    return notes;
}

Tick span_end(const std::vector<Note>& notes) {
    Tick end = 0;
    for (const auto& note : notes)
        end = std::max(end, note.time + std::max<Tick>(note.duration, 1));
    return end;
}

// per-tick count of distinct sounding pitches (binary piano-roll semantics)
std::vector<int> sounding_counts(const std::vector<Note>& notes) {
    std::vector<std::bitset<128>> grid(std::size_t(span_end(notes)));
    for (const auto& note : notes) {
        Tick end = note.time + std::max<Tick>(note.duration, 1);
        for (Tick t = note.time; t < end; ++t) grid[std::size_t(t)].set(std::size_t(note.pitch));
    }
    std::vector<int> counts(grid.size());
    for (std::size_t t = 0; t < grid.size(); ++t) counts[t] = int(grid[t].count());
    return counts;
}

double entropy_bits(const std::vector<std::int64_t>& histogram) {
    std::int64_t total = 0;
    for (auto count : histogram) total += count;
    double bits = 0.0;
    for (auto count : histogram) {
        if (count == 0) continue;
        double p = double(count) / double(total);
        bits -= p * std::log2(p);
    }
    return bits;
}

constexpr std::array<int, 7> kMajorScale{0, 2, 4, 5, 7, 9, 11};
constexpr std::array<int, 7> kMinorScale{0, 2, 3, 5, 7, 8, 10};  // natural minor

bool in_scale(int pitch, int root, Mode mode) {
    int pc = ((pitch - root) % 12 + 12) % 12;
    const auto& scale = mode == Mode::major ? kMajorScale : kMinorScale;
    return std::find(scale.begin(), scale.end(), pc) != scale.end();
}

}  // namespace

std::optional<double> polyphony(const Music& music) {
    auto counts = sounding_counts(melodic_notes(music));
    std::int64_t sounding_steps = 0, pitch_steps = 0;
    for (int c : counts) {
        if (c == 0) continue;
        ++sounding_steps;
        pitch_steps += c;
    }
    if (sounding_steps == 0) return std::nullopt;
    return double(pitch_steps) / double(sounding_steps);
}

std::optional<double> polyphony_rate(const Music& music, int threshold) {
    auto counts = sounding_counts(melodic_notes(music));
    std::int64_t sounding_steps = 0, polyphonic_steps = 0;
    for (int c : counts) {
        if (c == 0) continue;
        ++sounding_steps;
        if (c >= threshold) ++polyphonic_steps;
    }
    if (sounding_steps == 0) return std::nullopt;
    return double(polyphonic_steps) / double(sounding_steps);
}

std::optional<double> pitch_in_scale_rate(const Music& music, int root, Mode mode) {
    if (root < 0 || root > 11)
        throw Error(errc::invalid_argument, "root must be in [0, 11], got " +
                                                std::to_string(root));
    auto notes = melodic_notes(music);
    if (notes.empty()) return std::nullopt;
    std::int64_t hits = 0;
    for (const auto& note : notes)
        if (in_scale(note.pitch, root, mode)) ++hits;
    return double(hits) / double(notes.size());
}

std::optional<double> scale_consistency(const Music& music) {
    if (melodic_notes(music).empty()) return std::nullopt;
    double best = 0.0;
    for (int root = 0; root < 12; ++root)
        for (Mode mode : {Mode::major, Mode::minor})
            best = std::max(best, *pitch_in_scale_rate(music, root, mode));
    return best;
}

std::optional<double> pitch_entropy(const Music& music) {
    auto notes = melodic_notes(music);
    if (notes.empty()) return std::nullopt;
    std::vector<std::int64_t> histogram(128, 0);
    for (const auto& note : notes) ++histogram[std::size_t(note.pitch)];
    return entropy_bits(histogram);
}

std::optional<double> pitch_class_entropy(const Music& music) {
    auto notes = melodic_notes(music);
    if (notes.empty()) return std::nullopt;
    std::vector<std::int64_t> histogram(12, 0);
    for (const auto& note : notes) ++histogram[std::size_t(note.pitch % 12)];
    return entropy_bits(histogram);
}

std::optional<double> empty_beat_rate(const Music& music, EmptyBeatMode mode) {
    const Tick r = music.resolution;
    const Tick end = end_time(music);
    if (end <= 0) return std::nullopt;
    const auto beats = std::size_t((end + r - 1) / r);
    std::vector<bool> occupied(beats, false);
    for (const auto& note : melodic_notes(music)) {
        if (mode == EmptyBeatMode::onset) {
            occupied[std::size_t(note.time / r)] = true;
        } else {
            Tick note_end = note.time + std::max<Tick>(note.duration, 1);
            for (Tick b = note.time / r; b * r < note_end && b < Tick(beats); ++b)
                occupied[std::size_t(b)] = true;
        }
    }
    std::size_t empty = 0;
    for (bool b : occupied)
        if (!b) ++empty;
    return double(empty) / double(beats);
}

std::optional<double> drum_in_pattern_rate(const Music& music, MeterKind meter) {
    if (music.resolution % 6 != 0)
        throw Error(errc::invalid_argument,
                    "drum pattern grids need a resolution divisible by 6, got " +
                        std::to_string(music.resolution));
    auto notes = drum_notes(music);
    if (notes.empty()) return std::nullopt;
    const Tick grid = meter == MeterKind::duple ? music.resolution / 2 : music.resolution / 3;
    std::int64_t hits = 0;
    for (const auto& note : notes)
        if (note.time % grid == 0) ++hits;
    return double(hits) / double(notes.size());
}

std::optional<double> drum_pattern_consistency(const Music& music) {
    auto duple = drum_in_pattern_rate(music, MeterKind::duple);
    auto triple = drum_in_pattern_rate(music, MeterKind::triple);
    if (!duple || !triple) return std::nullopt;
    return std::max(*duple, *triple);
}

std::optional<double> groove_consistency(const Music& music, Tick measure_len) {
    if (measure_len < 1)
        throw Error(errc::invalid_argument, "measure length must be >= 1, got " +
                                                std::to_string(measure_len));
    const Tick end = end_time(music);
    if (end <= measure_len) return std::nullopt;  // fewer than two measures
    const auto measures = std::size_t((end + measure_len - 1) / measure_len);
    std::vector<std::vector<bool>> onset(measures,
                                         std::vector<bool>(std::size_t(measure_len), false));
    for (const auto& note : melodic_notes(music))
        onset[std::size_t(note.time / measure_len)][std::size_t(note.time % measure_len)] =
            true;
    double hamming_sum = 0.0;
    for (std::size_t i = 0; i + 1 < measures; ++i) {
        int differing = 0;
        for (std::size_t k = 0; k < std::size_t(measure_len); ++k)
            if (onset[i][k] != onset[i + 1][k]) ++differing;
        hamming_sum += double(differing) / double(measure_len);
    }
    return 1.0 - hamming_sum / double(measures - 1);
}

namespace {

const char* kRootNames[] = {"C", "C#", "D", "D#", "E", "F",
                            "F#", "G", "G#", "A", "A#", "B"};

void put(MetricReport& report, const std::string& name, std::optional<double> value,
         const std::string& reason_if_undefined) {
    report.values[name] = value;
    if (!value) report.reasons[name] = reason_if_undefined;
}

}  // namespace

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, value] : values) {
        if (value)
            j[name] = *value;
        else
            j[name] = nullptr;
    }
    nlohmann::ordered_json rj = nlohmann::ordered_json::object();
    for (const auto& [name, reason] : reasons) rj[name] = reason;
    j["reasons"] = rj;
    nlohmann::ordered_json pj = nlohmann::ordered_json::object();
    for (const auto& [name, parameter] : parameters) pj[name] = parameter;
    j["parameters"] = pj;
    return j.dump(2) + "\n";
}

MetricReport evaluate_all(const Music& music) {
    MetricReport report;
    const char* no_steps = "no sounding step";
    const char* no_notes = "no non-drum note";
    put(report, "polyphony", polyphony(music), no_steps);
    put(report, "polyphony_rate", polyphony_rate(music), no_steps);
    if (!music.key_signatures.empty()) {
        const auto& key = music.key_signatures.front();
        put(report, "pitch_in_scale_rate", pitch_in_scale_rate(music, key.root, key.mode),
            no_notes);
        report.parameters["pitch_in_scale_rate.key"] =
            std::string(kRootNames[key.root]) + " " + mode_name(key.mode);
    } else {
        put(report, "pitch_in_scale_rate", std::nullopt, "no key signature");
    }
    put(report, "scale_consistency", scale_consistency(music), no_notes);
    put(report, "pitch_entropy", pitch_entropy(music), no_notes);
    put(report, "pitch_class_entropy", pitch_class_entropy(music), no_notes);
    put(report, "empty_beat_rate", empty_beat_rate(music), "no notes");
    if (music.resolution % 6 == 0) {
        put(report, "drum_in_pattern_rate_duple",
            drum_in_pattern_rate(music, MeterKind::duple), "no drum note");
        put(report, "drum_in_pattern_rate_triple",
            drum_in_pattern_rate(music, MeterKind::triple), "no drum note");
        put(report, "drum_pattern_consistency", drum_pattern_consistency(music),
            "no drum note");
    } else {
        const char* why = "resolution not divisible by 6";
        put(report, "drum_in_pattern_rate_duple", std::nullopt, why);
        put(report, "drum_in_pattern_rate_triple", std::nullopt, why);
        put(report, "drum_pattern_consistency", std::nullopt, why);
    }
    Tick measure_len = 4 * Tick(music.resolution);
    std::string measure_source = "4/4 assumed";
    if (!music.time_signatures.empty()) {
        const auto& ts = music.time_signatures.front();
        measure_len = Tick(ts.numerator) * 4 * music.resolution / ts.denominator;
        measure_source = std::to_string(ts.numerator) + "/" + std::to_string(ts.denominator);
    }
    if (measure_len < 1) measure_len = 1;
    put(report, "groove_consistency", groove_consistency(music, measure_len),
        "fewer than two measures");
    report.parameters["groove_consistency.measure_len"] = std::to_string(measure_len);
    report.parameters["groove_consistency.time_signature"] = measure_source;
    report.parameters["entropy.base"] = "2";
    report.parameters["scales.minor"] = "natural";
    report.parameters["empty_beat_rate.mode"] = "onset";
    report.parameters["step_grid"] = "non-drum tracks; drums feed only drum metrics";
    return report;
}

}  // namespace musekit
