#include "musekit/music.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace musekit {

const char* errc_name(errc code) {
    switch (code) {
        case errc::ok: return "ok";
        case errc::invalid_argument: return "invalid_argument";
        case errc::validation: return "validation";
        case errc::parse: return "parse";
        case errc::schema: return "schema";
        case errc::version: return "version";
        case errc::unsupported: return "unsupported";
        case errc::domain: return "domain";
        case errc::io: return "io";
        case errc::archive: return "archive";
        case errc::integrity: return "integrity";
        case errc::transfer: return "transfer";
        case errc::config: return "config";
        case errc::internal: return "internal";
    }
    return "unknown";
}

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
    std::ostringstream out;
    out << "music failed validation (" << violations.size() << " violation"
        << (violations.size() == 1 ? "" : "s") << ")";
    for (const auto& v : violations) out << "; " << v.field << ": " << v.message;
    return out.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(errc::validation, join_violations(violations)),
      violations_(std::move(violations)) {}

const char* mode_name(Mode mode) {
    return mode == Mode::major ? "major" : "minor";
}

namespace {

class Validator {
public:
    std::vector<Violation> run(const Music& music) {
        if (music.resolution < 1)
            add("resolution", "must be >= 1, got " + std::to_string(music.resolution));
        if (music.metadata.schema_version != kSchemaVersion)
            add("metadata.schema_version",
                "expected \"" + std::string(kSchemaVersion) + "\", got \"" +
                    music.metadata.schema_version + "\"");
        if (music.metadata.source_format) {
            bool known = false;
            for (const char* f : kSourceFormats)
                if (*music.metadata.source_format == f) known = true;
            if (!known)
                add("metadata.source_format",
                    "unknown format \"" + *music.metadata.source_format + "\"");
        }
        for (std::size_t i = 0; i < music.tempos.size(); ++i) {
            const auto& t = music.tempos[i];
            std::string at = "tempos[" + std::to_string(i) + "]";
            check_time(at, t.time);
            if (!(t.qpm > 0.0) || !std::isfinite(t.qpm))
                add(at + ".qpm", "must be > 0, got " + format_double(t.qpm));
        }
        for (std::size_t i = 0; i < music.key_signatures.size(); ++i) {
            const auto& k = music.key_signatures[i];
            std::string at = "key_signatures[" + std::to_string(i) + "]";
            check_time(at, k.time);
            if (k.root < 0 || k.root > 11)
                add(at + ".root", "must be in [0, 11], got " + std::to_string(k.root));
        }
        for (std::size_t i = 0; i < music.time_signatures.size(); ++i) {
            const auto& s = music.time_signatures[i];
            std::string at = "time_signatures[" + std::to_string(i) + "]";
            check_time(at, s.time);
            if (s.numerator < 1)
                add(at + ".numerator", "must be >= 1, got " + std::to_string(s.numerator));
            if (!valid_denominator(s.denominator))
                add(at + ".denominator",
                    "must be a power of two in [1, 64], got " + std::to_string(s.denominator));
        }
        for (std::size_t i = 0; i < music.tracks.size(); ++i)
            check_track("tracks[" + std::to_string(i) + "]", music.tracks[i]);
        return std::move(violations_);
    }

private:
    static bool valid_denominator(int d) {
        return d == 1 || d == 2 || d == 4 || d == 8 || d == 16 || d == 32 || d == 64;
    }

    static std::string format_double(double v) {
        std::ostringstream out;
        out << v;
        return out.str();
    }

    void check_track(const std::string& at, const Track& track) {
        if (track.program < 0 || track.program > 127)
            add(at + ".program", "must be in [0, 127], got " + std::to_string(track.program));
        for (std::size_t i = 0; i < track.notes.size(); ++i) {
            const auto& n = track.notes[i];
            std::string nat = at + ".notes[" + std::to_string(i) + "]";
            check_time(nat, n.time);
            if (n.pitch < 0 || n.pitch > 127)
                add(nat + ".pitch", "must be in [0, 127], got " + std::to_string(n.pitch));
            if (n.velocity < 0 || n.velocity > 127)
                add(nat + ".velocity", "must be in [0, 127], got " + std::to_string(n.velocity));
            if (n.duration < 0)
                add(nat + ".duration", "must be >= 0, got " + std::to_string(n.duration));
        }
        for (std::size_t i = 0; i < track.chords.size(); ++i) {
            const auto& c = track.chords[i];
            std::string cat = at + ".chords[" + std::to_string(i) + "]";
            check_time(cat, c.time);
            if (c.pitches.empty()) add(cat + ".pitches", "must be non-empty");
            for (std::size_t j = 0; j < c.pitches.size(); ++j)
                if (c.pitches[j] < 0 || c.pitches[j] > 127)
                    add(cat + ".pitches[" + std::to_string(j) + "]",
                        "must be in [0, 127], got " + std::to_string(c.pitches[j]));
            if (c.velocity < 0 || c.velocity > 127)
                add(cat + ".velocity", "must be in [0, 127], got " + std::to_string(c.velocity));
            if (c.duration < 0)
                add(cat + ".duration", "must be >= 0, got " + std::to_string(c.duration));
        }
        for (std::size_t i = 0; i < track.lyrics.size(); ++i)
            check_time(at + ".lyrics[" + std::to_string(i) + "]", track.lyrics[i].time);
    }

    void check_time(const std::string& at, Tick time) {
        if (time < 0) add(at + ".time", "must be >= 0, got " + std::to_string(time));
    }

    void add(std::string field, std::string message) {
        violations_.push_back({std::move(field), std::move(message)});
    }

    std::vector<Violation> violations_;
};

}  // namespace

std::vector<Violation> validate(const Music& music) {
    return Validator().run(music);
}

void ensure_valid(const Music& music) {
    auto violations = validate(music);
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

Music sort(Music music) {
    auto by_time = [](const auto& a, const auto& b) { return a.time < b.time; };
    std::stable_sort(music.tempos.begin(), music.tempos.end(), by_time);
    std::stable_sort(music.key_signatures.begin(), music.key_signatures.end(), by_time);
    std::stable_sort(music.time_signatures.begin(), music.time_signatures.end(), by_time);
    for (auto& track : music.tracks) {
        std::stable_sort(track.notes.begin(), track.notes.end(),
                         [](const Note& a, const Note& b) {
                             if (a.time != b.time) return a.time < b.time;
                             return a.pitch < b.pitch;
                         });
        std::stable_sort(track.chords.begin(), track.chords.end(), by_time);
        std::stable_sort(track.lyrics.begin(), track.lyrics.end(), by_time);
    }
    return music;
}

namespace {

// round(t * target / resolution) with round-half-up; exact in integers.
Tick rescale(Tick t, std::int64_t target, std::int64_t resolution) {
    return (2 * t * target + resolution) / (2 * resolution);
}

}  // namespace

Music adjust_resolution(Music music, int target) {
    if (target < 1)
        throw Error(errc::invalid_argument,
                    "target resolution must be >= 1, got " + std::to_string(target));
    const std::int64_t res = music.resolution;
    if (res == target) return music;
    auto fix = [&](Tick t) { return rescale(t, target, res); };
    for (auto& t : music.tempos) t.time = fix(t.time);
    for (auto& k : music.key_signatures) k.time = fix(k.time);
    for (auto& s : music.time_signatures) s.time = fix(s.time);
    for (auto& track : music.tracks) {
        for (auto& n : track.notes) {
            Tick start = fix(n.time);
            n.duration = fix(n.duration);
            n.time = start;
        }
        for (auto& c : track.chords) {
            c.duration = fix(c.duration);
            c.time = fix(c.time);
        }
        for (auto& l : track.lyrics) l.time = fix(l.time);
    }
    music.resolution = target;
    return music;
}

Tick end_time(const Music& music) {
    Tick end = 0;
    for (const auto& track : music.tracks)
        for (const auto& note : track.notes) end = std::max(end, note.end());
    return end;
}

double duration_seconds(const Music& music) {
    const Tick end = end_time(music);
    if (end <= 0) return 0.0;

    // (tick, qpm) change points, default 120 before the first event.
    std::vector<Tempo> tempos(music.tempos);
    std::stable_sort(tempos.begin(), tempos.end(),
                     [](const Tempo& a, const Tempo& b) { return a.time < b.time; });

    double seconds = 0.0;
    Tick cursor = 0;
    double qpm = 120.0;
    for (const auto& tempo : tempos) {
        if (tempo.time >= end) break;
        if (tempo.time > cursor) {
            seconds += double(tempo.time - cursor) / music.resolution * 60.0 / qpm;
            cursor = tempo.time;
        }
        qpm = tempo.qpm;
    }
    seconds += double(end - cursor) / music.resolution * 60.0 / qpm;
    return seconds;
}

}  // namespace musekit
