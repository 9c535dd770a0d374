#include "musekit/abc_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "text_util.hpp"

namespace musekit {

namespace {

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Fraction of(std::int64_t n, std::int64_t d) {
        Fraction f{n, d};
        f.reduce();
        return f;
    }

    void reduce() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    Fraction operator+(const Fraction& o) const {
        return of(num * o.den + o.num * den, den * o.den);
    }
    Fraction operator*(const Fraction& o) const { return of(num * o.num, den * o.den); }
    double value() const { return double(num) / double(den); }
};

// position in whole notes -> ticks at 24 per quarter, round half up
Tick to_ticks(const Fraction& position) {
    const std::int64_t per_whole = 4 * kAbcResolution;
    return (2 * position.num * per_whole + position.den) / (2 * position.den);
}

int letter_semitone(char letter) {
    switch (letter) {
        case 'C': return 0;
        case 'D': return 2;
        case 'E': return 4;
        case 'F': return 5;
        case 'G': return 7;
        case 'A': return 9;
        case 'B': return 11;
    }
    return -1;
}

// sharps apply to F C G D A E B, flats to B E A D G C F
const char kSharpOrder[] = {'F', 'C', 'G', 'D', 'A', 'E', 'B'};
const char kFlatOrder[] = {'B', 'E', 'A', 'D', 'G', 'C', 'F'};

struct KeyInfo {
    int root = 0;             // pitch class of the tonic as written
    Mode mode = Mode::major;  // reduced to major/minor for the signature list
    std::map<char, int> alters;  // letter -> -1/0/+1 from the key signature
};

std::optional<KeyInfo> parse_key(std::string_view value, Diagnostics* diag) {
    // strip clef and other trailing specifiers
    std::string key;
    for (char c : value) {
        if (std::isspace(std::uint8_t(c))) break;
        key.push_back(c);
    }
    if (key.empty() || key == "none") return std::nullopt;

    std::size_t at = 0;
    char letter = char(std::toupper(std::uint8_t(key[at])));
    if (letter_semitone(letter) < 0) {
        if (diag) diag->add("key_unrecognized");
        return std::nullopt;
    }
    ++at;
    int alter = 0;
    if (at < key.size() && (key[at] == '#' || key[at] == 'b')) {
        alter = key[at] == '#' ? 1 : -1;
        ++at;
    }
    std::string mode_text;
    for (; at < key.size(); ++at)
        mode_text.push_back(char(std::tolower(std::uint8_t(key[at]))));

    // mode offsets on the circle of fifths relative to ionian
    int offset = 0;
    bool minorish = false;
    if (mode_text.empty() || mode_text.rfind("maj", 0) == 0 || mode_text.rfind("ion", 0) == 0) {
        offset = 0;
    } else if (mode_text == "m" || mode_text.rfind("min", 0) == 0 ||
               mode_text.rfind("aeo", 0) == 0) {
        offset = -3;
        minorish = true;
    } else if (mode_text.rfind("mix", 0) == 0) {
        offset = -1;
    } else if (mode_text.rfind("dor", 0) == 0) {
        offset = -2;
        minorish = true;
    } else if (mode_text.rfind("phr", 0) == 0) {
        offset = -4;
        minorish = true;
    } else if (mode_text.rfind("lyd", 0) == 0) {
        offset = 1;
    } else if (mode_text.rfind("loc", 0) == 0) {
        offset = -5;
        minorish = true;
    } else {
        if (diag) diag->add("key_mode_unrecognized");
        offset = 0;
    }

    KeyInfo info;
    int tonic = (letter_semitone(letter) + alter + 12) % 12;
    info.root = tonic;
    info.mode = minorish ? Mode::minor : Mode::major;

    int major_fifths = tonic * 7 % 12;  // tonic as a major key
    if (major_fifths > 6) major_fifths -= 12;
    int fifths = major_fifths + offset;
    if (fifths > 7 || fifths < -7) fifths = (fifths > 0) ? fifths - 12 : fifths + 12;
    if (fifths > 0)
        for (int i = 0; i < fifths && i < 7; ++i) info.alters[kSharpOrder[i]] = 1;
    else
        for (int i = 0; i < -fifths && i < 7; ++i) info.alters[kFlatOrder[i]] = -1;
    return info;
}

struct MeterInfo {
    int numerator = 4;
    int denominator = 4;
    bool free = false;  // M:none
    double value() const { return double(numerator) / double(denominator); }
};

std::optional<MeterInfo> parse_meter(std::string_view value) {
    std::string text(value);
    text.erase(std::remove_if(text.begin(), text.end(),
                              [](char c) { return std::isspace(std::uint8_t(c)); }),
               text.end());
    MeterInfo meter;
    if (text == "none") {
        meter.free = true;
        return meter;
    }
    if (text == "C") return MeterInfo{4, 4, false};
    if (text == "C|") return MeterInfo{2, 2, false};
    auto slash = text.find('/');
    if (slash == std::string::npos) return std::nullopt;
    try {
        // compound numerators like 2+3/8 sum their parts
        int numerator = 0;
        std::stringstream parts(text.substr(0, slash));
        std::string part;
        while (std::getline(parts, part, '+')) numerator += std::stoi(part);
        meter.numerator = numerator;
        meter.denominator = std::stoi(text.substr(slash + 1));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (meter.numerator < 1 || meter.denominator < 1) return std::nullopt;
    return meter;
}

std::optional<Fraction> parse_fraction(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    try {
        std::int64_t num = std::stoll(std::string(text.substr(0, slash)));
        std::int64_t den = std::stoll(std::string(text.substr(slash + 1)));
        if (num < 1 || den < 1) return std::nullopt;
        return Fraction::of(num, den);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct HeaderFields {
    std::optional<int> reference;
    std::optional<std::string> title;
    std::vector<std::string> creators;
    std::optional<MeterInfo> meter;
    std::optional<Fraction> unit_length;
    std::optional<std::string> tempo;
    std::optional<std::string> key;
    bool has_key_line = false;
};

class TuneParser {
public:
    TuneParser(std::string_view text, int reference, Diagnostics* diag)
        : text_(text), reference_(reference), diag_(diag) {}

    Music parse() {
        music_.resolution = kAbcResolution;
        music_.metadata.source_format = "abc";
        music_.tracks.push_back(Track{});

        parse_header();
        apply_header();
        parse_body();
        return sort(std::move(music_));
    }

private:
    [[noreturn]] void fail(const std::string& message, std::size_t at) {
        throw Error(errc::parse, "tune X:" + std::to_string(reference_) + ": " + message +
                                     " at offset " + std::to_string(at));
    }

    void warn(const std::string& key) {
        if (diag_) diag_->add(key);
    }

    static std::string strip_comment(std::string_view line) {
        std::string out;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '%') break;
            if (line[i] == '\\' && i + 1 < line.size() && line[i + 1] == '%') {
                out.push_back('%');
                ++i;
                continue;
            }
            out.push_back(line[i]);
        }
        while (!out.empty() && (out.back() == '\r' || out.back() == ' ' || out.back() == '\t'))
            out.pop_back();
        return out;
    }

    static std::string trimmed(std::string_view s) {
        std::size_t b = s.find_first_not_of(" \t");
        if (b == std::string_view::npos) return {};
        std::size_t e = s.find_last_not_of(" \t");
        return std::string(s.substr(b, e - b + 1));
    }

    // header runs to the K: line (ABC rule: K: is last before the body)
    void parse_header() {
        std::size_t line_start = 0;
        while (line_start < text_.size()) {
            std::size_t line_end = text_.find('\n', line_start);
            if (line_end == std::string_view::npos) line_end = text_.size();
            std::string line = strip_comment(text_.substr(line_start, line_end - line_start));
            std::size_t next = line_end + 1;

            if (line.size() >= 2 && line[1] == ':' && std::isalpha(std::uint8_t(line[0]))) {
                char field = line[0];
                std::string value = trimmed(std::string_view(line).substr(2));
                switch (field) {
                    case 'X':
                        try {
                            header_.reference = std::stoi(value);
                        } catch (const std::exception&) {
                            header_.reference = reference_;
                        }
                        break;
                    case 'T':
                        if (!header_.title) header_.title = to_valid_utf8(value);
                        break;
                    case 'C': header_.creators.push_back(to_valid_utf8(value)); break;
                    case 'M': {
                        auto meter = parse_meter(value);
                        if (meter) header_.meter = meter;
                        else warn("meter_unrecognized");
                        break;
                    }
                    case 'L': {
                        auto unit = parse_fraction(value);
                        if (unit) header_.unit_length = unit;
                        else warn("unit_length_unrecognized");
                        break;
                    }
                    case 'Q': header_.tempo = value; break;
                    case 'K':
                        header_.key = value;
                        header_.has_key_line = true;
                        body_start_ = next;
                        return;
                    case 'V':
                        throw Error(errc::unsupported,
                                    "tune X:" + std::to_string(reference_) +
                                        ": multi-voice tunes are not supported");
                    default: break;  // O:, R:, N:, ... carry no playback data
                }
            }
            line_start = next;
        }
        throw Error(errc::schema,
                    "tune X:" + std::to_string(reference_) + ": missing K: field");
    }

    void apply_header() {
        if (header_.title) music_.metadata.title = header_.title;
        music_.metadata.creators = header_.creators;

        meter_ = header_.meter.value_or(MeterInfo{4, 4, true});
        if (header_.meter && !header_.meter->free)
            music_.time_signatures.push_back(
                TimeSignature{0, meter_.numerator, meter_.denominator});

        // ABC default unit length: 1/8 unless the meter is shorter than 3/4
        unit_ = header_.unit_length.value_or(
            (!header_.meter || meter_.free || meter_.value() >= 0.75)
                ? Fraction::of(1, 8)
                : Fraction::of(1, 16));

        key_ = header_.key ? parse_key(*header_.key, diag_) : std::nullopt;
        if (key_) music_.key_signatures.push_back(KeySignature{0, key_->root, key_->mode});

        if (header_.tempo) apply_tempo(*header_.tempo, Tick(0));
    }

    void apply_tempo(std::string_view value, Tick tick) {
        std::string text = trimmed(value);
        if (text.empty() || text[0] == '"') {
            warn("tempo_unrecognized");
            return;
        }
        auto eq = text.find('=');
        double qpm = 0.0;
        try {
            if (eq == std::string::npos) {
                // plain "Q:120": unit note lengths per minute
                double per_minute = std::stod(text);
                qpm = per_minute * unit_.value() * 4.0;
            } else {
                auto beat = parse_fraction(trimmed(text.substr(0, eq)));
                double per_minute = std::stod(trimmed(text.substr(eq + 1)));
                if (!beat) {
                    warn("tempo_unrecognized");
                    return;
                }
                qpm = per_minute * beat->value() * 4.0;
            }
        } catch (const std::exception&) {
            warn("tempo_unrecognized");
            return;
        }
        if (qpm > 0) music_.tempos.push_back(Tempo{tick, qpm});
    }

    // ----- body ------------------------------------------------------------

    struct PendingTie {
        int pitch;
        std::size_t note_index;
    };

    void parse_body() {
        std::size_t at = body_start_;
        while (at < text_.size()) {
            std::size_t line_end = text_.find('\n', at);
            if (line_end == std::string_view::npos) line_end = text_.size();
            std::string line = strip_comment(text_.substr(at, line_end - at));
            std::size_t offset = at;
            at = line_end + 1;

            if (line.empty()) continue;
            if (line.size() >= 2 && line[1] == ':' && std::isalpha(std::uint8_t(line[0]))) {
                apply_body_field(line[0], trimmed(std::string_view(line).substr(2)), offset);
                continue;
            }
            parse_music_line(line, offset);
        }
    }

    void apply_body_field(char field, const std::string& value, std::size_t offset) {
        switch (field) {
            case 'w': break;  // aligned lyrics carry no timing
            case 'W': break;
            case 'K': {
                key_ = parse_key(value, diag_);
                accidentals_.clear();
                if (key_)
                    music_.key_signatures.push_back(
                        KeySignature{current_tick(), key_->root, key_->mode});
                break;
            }
            case 'M': {
                auto meter = parse_meter(value);
                if (meter) {
                    meter_ = *meter;
                    if (!meter->free)
                        music_.time_signatures.push_back(TimeSignature{
                            current_tick(), meter->numerator, meter->denominator});
                } else {
                    warn("meter_unrecognized");
                }
                break;
            }
            case 'L': {
                auto unit = parse_fraction(value);
                if (unit) unit_ = *unit;
                else warn("unit_length_unrecognized");
                break;
            }
            case 'Q': apply_tempo(value, current_tick()); break;
            case 'V':
                throw Error(errc::unsupported,
                            "tune X:" + std::to_string(reference_) +
                                ": multi-voice tunes are not supported");
            default: break;
        }
        (void)offset;
    }

    Tick current_tick() const { return to_ticks(position_); }

    void parse_music_line(const std::string& line, std::size_t base_offset) {
        std::size_t i = 0;
        while (i < line.size()) {
            char c = line[i];
            std::size_t offset = base_offset + i;

            if (c == ' ' || c == '\t' || c == '\\') {
                ++i;
                continue;
            }
            if (c == '"') {  // chord symbol / annotation
                auto end = line.find('"', i + 1);
                if (end == std::string::npos) fail("unterminated annotation", offset);
                warn("chord_symbol_skipped");
                i = end + 1;
                continue;
            }
            if (c == '{') {  // grace notes
                auto end = line.find('}', i + 1);
                if (end == std::string::npos) fail("unterminated grace group", offset);
                warn("grace_notes_skipped");
                i = end + 1;
                continue;
            }
            if (c == '!') {  // decoration !trill!
                auto end = line.find('!', i + 1);
                if (end == std::string::npos) {
                    ++i;  // lone ! is a line break hint in older dialects
                    continue;
                }
                warn("decoration_skipped");
                i = end + 1;
                continue;
            }
            if (c == '.' || c == '~' || c == 'u' || c == 'v' || c == 'H' || c == 'L' ||
                c == 'M' || c == 'O' || c == 'P' || c == 'S' || c == 'T') {
                // single-letter decoration shortcuts when not a note letter
                warn("decoration_skipped");
                ++i;
                continue;
            }
            if (c == '(') {
                if (i + 1 < line.size() && std::isdigit(std::uint8_t(line[i + 1]))) {
                    i = parse_tuplet(line, i, offset);
                } else {
                    ++i;  // slur start
                }
                continue;
            }
            if (c == ')') {
                ++i;  // slur end
                continue;
            }
            if (c == '-') {
                tie_pending_ = true;
                ++i;
                continue;
            }
            if (c == '>' || c == '<') {
                int depth = 0;
                while (i < line.size() && line[i] == c) {
                    ++depth;
                    ++i;
                }
                broken_ = c == '>' ? depth : -depth;
                continue;
            }
            if (c == '|' || c == ':') {
                i = parse_bar(line, i);
                continue;
            }
            if (c == '[') {
                if (i + 2 < line.size() && std::isalpha(std::uint8_t(line[i + 1])) &&
                    line[i + 2] == ':') {
                    auto end = line.find(']', i);
                    if (end == std::string::npos) fail("unterminated inline field", offset);
                    apply_body_field(line[i + 1],
                                     trimmed(std::string_view(line).substr(i + 3,
                                                                           end - i - 3)),
                                     offset);
                    i = end + 1;
                    continue;
                }
                if (i + 1 < line.size() && std::isdigit(std::uint8_t(line[i + 1]))) {
                    warn("variant_ending_skipped");
                    i += 2;
                    continue;
                }
                if (i + 1 < line.size() && line[i + 1] == '|') {  // [| thick bar
                    i = parse_bar(line, i + 1);
                    continue;
                }
                i = parse_chord(line, i, offset);
                continue;
            }
            if (c == ']') fail("unmatched ']'", offset);
            if (c == '&')
                throw Error(errc::unsupported, "tune X:" + std::to_string(reference_) +
                                                   ": voice overlay is not supported");
            if (c == '*') {
                ++i;  // ignored (old typesetting mark)
                continue;
            }
            if (is_note_start(line, i) || c == 'z' || c == 'x' || c == 'Z' || c == 'X') {
                i = parse_note_or_rest(line, i, offset);
                continue;
            }
            fail(std::string("unexpected character '") + c + "'", offset);
        }
    }

    std::size_t parse_bar(const std::string& line, std::size_t i) {
        bool repeat = false;
        while (i < line.size() &&
               (line[i] == '|' || line[i] == ':' || line[i] == ']' || line[i] == '[')) {
            if (line[i] == ':') repeat = true;
            if (line[i] == '[' &&
                !(i + 1 < line.size() &&
                  (line[i + 1] == '|' || std::isdigit(std::uint8_t(line[i + 1])))))
                break;  // chord or inline field, not part of the bar line
            ++i;
        }
        // variant ending digit straight after the bar line
        if (i < line.size() && std::isdigit(std::uint8_t(line[i])) && i > 0 &&
            (line[i - 1] == '|' || line[i - 1] == '[')) {
            warn("variant_ending_skipped");
            ++i;
        }
        if (repeat) warn("repeat_discarded");
        accidentals_.clear();
        return i;
    }

    static bool is_note_start(const std::string& line, std::size_t i) {
        char c = line[i];
        if (c == '^' || c == '_' || c == '=') return true;
        return letter_semitone(char(std::toupper(std::uint8_t(c)))) >= 0 && c != 'Z' &&
               c != 'X';
    }

    struct ParsedNote {
        int pitch = 0;
        Fraction length;  // in whole notes, before tuplet/broken adjustments
    };

    // accidentals, letter, octave marks, length
    std::size_t parse_one_note(const std::string& line, std::size_t i, std::size_t offset,
                               ParsedNote& out) {
        std::optional<int> accidental;
        while (i < line.size() && (line[i] == '^' || line[i] == '_' || line[i] == '=')) {
            if (line[i] == '=') accidental = 0;
            else accidental = accidental.value_or(0) + (line[i] == '^' ? 1 : -1);
            ++i;
        }
        if (i >= line.size()) fail("accidental without a note", offset);
        char letter = line[i];
        int semitone = letter_semitone(char(std::toupper(std::uint8_t(letter))));
        if (semitone < 0) fail(std::string("expected a note after accidental"), base(offset, i));
        bool lower = std::islower(std::uint8_t(letter)) != 0;
        ++i;
        int octave = lower ? 5 : 4;
        while (i < line.size() && (line[i] == '\'' || line[i] == ',')) {
            octave += line[i] == '\'' ? 1 : -1;
            ++i;
        }

        char letter_key = char(std::toupper(std::uint8_t(letter)));
        int alter;
        auto acc_key = std::make_pair(letter_key, octave);
        if (accidental) {
            alter = *accidental;
            accidentals_[acc_key] = alter;
        } else if (auto it = accidentals_.find(acc_key); it != accidentals_.end()) {
            alter = it->second;
        } else if (key_ && key_->alters.count(letter_key)) {
            alter = key_->alters.at(letter_key);
        } else {
            alter = 0;
        }

        int pitch = (octave + 1) * 12 + semitone + alter;
        if (pitch < 0 || pitch > 127) fail("pitch out of range", offset);
        out.pitch = pitch;

        auto [length, next] = parse_length(line, i);
        out.length = unit_ * length;
        return next;
    }

    std::pair<Fraction, std::size_t> parse_length(const std::string& line, std::size_t i) {
        std::int64_t num = 1;
        std::int64_t den = 1;
        if (i < line.size() && std::isdigit(std::uint8_t(line[i]))) {
            num = 0;
            while (i < line.size() && std::isdigit(std::uint8_t(line[i])))
                num = num * 10 + (line[i++] - '0');
            if (num == 0) num = 1;
        }
        while (i < line.size() && line[i] == '/') {
            ++i;
            if (i < line.size() && std::isdigit(std::uint8_t(line[i]))) {
                std::int64_t d = 0;
                while (i < line.size() && std::isdigit(std::uint8_t(line[i])))
                    d = d * 10 + (line[i++] - '0');
                den *= std::max<std::int64_t>(d, 1);
            } else {
                den *= 2;
            }
        }
        return {Fraction::of(num, den), i};
    }

    // tuplet scaling plus broken-rhythm handling. A '>' or '<' between two
    // tokens retroactively rescales the token already emitted and scales the
    // incoming one so the pair keeps its combined length.
    Fraction begin_token_length(Fraction raw) {
        if (tuplet_remaining_ > 0) {
            raw = raw * tuplet_scale_;
            --tuplet_remaining_;
        }
        if (broken_ != 0) {
            std::int64_t p = 1 << std::min(std::abs(broken_), 3);
            Fraction prev_factor =
                broken_ > 0 ? Fraction::of(2 * p - 1, p) : Fraction::of(1, p);
            Fraction next_factor =
                broken_ > 0 ? Fraction::of(1, p) : Fraction::of(2 * p - 1, p);
            restate_previous(prev_factor);
            raw = raw * next_factor;
            broken_ = 0;
        }
        return raw;
    }

    void restate_previous(Fraction factor) {
        if (!last_token_valid_) {
            warn("broken_rhythm_without_pair");
            return;
        }
        Fraction new_length = last_length_ * factor;
        position_ = last_start_ + new_length;
        Tick start = to_ticks(last_start_);
        Tick duration = to_ticks(position_) - start;
        for (std::size_t index : last_note_indices_)
            music_.tracks[0].notes[index].duration = duration;
    }

    void remember_token(Fraction start, Fraction length, std::vector<std::size_t> indices) {
        last_start_ = start;
        last_length_ = length;
        last_note_indices_ = std::move(indices);
        last_token_valid_ = true;
    }

    std::size_t parse_note_or_rest(const std::string& line, std::size_t i,
                                   std::size_t offset) {
        char c = line[i];
        if (c == 'z' || c == 'x' || c == 'Z' || c == 'X') {
            ++i;
            auto [length, next] = parse_length(line, i);
            i = next;
            Fraction duration;
            if (c == 'Z' || c == 'X') {
                // measure rest: length counts whole measures
                Fraction measure = meter_.free
                                       ? Fraction::of(1, 1)
                                       : Fraction::of(meter_.numerator, meter_.denominator);
                duration = measure * length;
            } else {
                duration = begin_token_length(unit_ * length);
            }
            remember_token(position_, duration, {});
            position_ = position_ + duration;
            tie_pending_ = false;
            return i;
        }

        ParsedNote note;
        i = parse_one_note(line, i, offset, note);
        Fraction duration = begin_token_length(note.length);
        emit_note(note.pitch, duration);
        return maybe_tie(line, i);
    }

    void emit_note(int pitch, Fraction duration) {
        Tick start = to_ticks(position_);
        Fraction end_position = position_ + duration;
        Tick ticks = to_ticks(end_position) - start;
        auto& notes = music_.tracks[0].notes;

        if (tie_pending_) {
            tie_pending_ = false;
            if (!notes.empty() && notes.back().pitch == pitch &&
                notes.back().end() == start) {
                notes.back().duration += ticks;
                position_ = end_position;
                last_token_valid_ = false;  // merged notes cannot be restated
                return;
            }
            warn("tie_pitch_mismatch");
        }
        notes.push_back(Note{start, pitch, ticks, 64});
        remember_token(position_, duration, {notes.size() - 1});
        position_ = end_position;
    }

    std::size_t maybe_tie(const std::string& line, std::size_t i) {
        if (i < line.size() && line[i] == '-') {
            tie_pending_ = true;
            ++i;
        }
        return i;
    }

    std::size_t parse_chord(const std::string& line, std::size_t i, std::size_t offset) {
        ++i;  // '['
        std::vector<ParsedNote> pitches;
        while (i < line.size() && line[i] != ']') {
            if (line[i] == ' ') {
                ++i;
                continue;
            }
            if (!is_note_start(line, i)) fail("unexpected character in chord", base(offset, i));
            ParsedNote note;
            i = parse_one_note(line, i, offset, note);
            if (i < line.size() && line[i] == '-') {
                warn("chord_tie_skipped");
                ++i;
            }
            pitches.push_back(note);
        }
        if (i >= line.size()) fail("unterminated chord", offset);
        ++i;  // ']'
        auto [outer, next] = parse_length(line, i);
        i = next;
        if (pitches.empty()) {
            warn("empty_chord_skipped");
            return i;
        }
        // the first note's length drives the time advance
        Fraction duration = begin_token_length(pitches[0].length * outer);
        Tick start = to_ticks(position_);
        Fraction end_position = position_ + duration;
        Tick ticks = to_ticks(end_position) - start;
        tie_pending_ = false;
        std::vector<std::size_t> indices;
        for (const auto& note : pitches) {
            indices.push_back(music_.tracks[0].notes.size());
            music_.tracks[0].notes.push_back(Note{start, note.pitch, ticks, 64});
        }
        remember_token(position_, duration, std::move(indices));
        position_ = end_position;
        return maybe_tie(line, i);
    }

    std::size_t parse_tuplet(const std::string& line, std::size_t i, std::size_t offset) {
        ++i;  // '('
        int values[3] = {0, 0, 0};
        int part = 0;
        while (i < line.size() && part < 3) {
            if (std::isdigit(std::uint8_t(line[i]))) {
                values[part] = values[part] * 10 + (line[i] - '0');
                ++i;
            } else if (line[i] == ':') {
                ++part;
                ++i;
            } else {
                break;
            }
        }
        int p = values[0];
        if (p < 2) fail("malformed tuplet", offset);
        bool compound = !meter_.free && meter_.denominator == 8 &&
                        meter_.numerator % 3 == 0;  // 6/8, 9/8, 12/8
        int q = values[1];
        if (q == 0) {
            switch (p) {
                case 2: q = 3; break;
                case 3: q = 2; break;
                case 4: q = 3; break;
                case 6: q = 2; break;
                case 8: q = 3; break;
                default: q = compound ? 3 : 2; break;
            }
        }
        int r = values[2] ? values[2] : p;
        tuplet_scale_ = Fraction::of(q, p);
        tuplet_remaining_ = r;
        return i;
    }

    std::size_t base(std::size_t offset, std::size_t i) const { return offset + i; }

    std::string_view text_;
    int reference_;
    Diagnostics* diag_;

    HeaderFields header_;
    std::size_t body_start_ = 0;

    Music music_;
    MeterInfo meter_;
    Fraction unit_ = Fraction::of(1, 8);
    std::optional<KeyInfo> key_;

    Fraction position_ = Fraction::of(0, 1);
    std::map<std::pair<char, int>, int> accidentals_;  // (letter, octave) -> alter
    bool tie_pending_ = false;
    int broken_ = 0;  // pending > / < depth, sign = direction
    Fraction tuplet_scale_ = Fraction::of(1, 1);
    int tuplet_remaining_ = 0;
    bool last_token_valid_ = false;
    Fraction last_start_ = Fraction::of(0, 1);
    Fraction last_length_ = Fraction::of(0, 1);
    std::vector<std::size_t> last_note_indices_;
};

}  // namespace

std::vector<TuneSpan> scan_tunes(std::string_view text) {
    std::vector<TuneSpan> spans;
    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        if (line_end - line_start >= 2 && text[line_start] == 'X' &&
            text[line_start + 1] == ':') {
            if (!spans.empty()) spans.back().end = line_start;
            int reference = 0;
            std::size_t at = line_start + 2;
            while (at < line_end && text[at] == ' ') ++at;
            while (at < line_end && std::isdigit(std::uint8_t(text[at])))
                reference = reference * 10 + (text[at++] - '0');
            spans.push_back(TuneSpan{reference, line_start, text.size()});
        }
        line_start = line_end + 1;
    }
    return spans;
}

std::vector<Music> read_abc(std::string_view text, Diagnostics* diag) {
    std::vector<Music> out;
    for (const auto& span : scan_tunes(text)) {
        TuneParser parser(text.substr(span.begin, span.end - span.begin), span.reference,
                          diag);
        out.push_back(parser.parse());
    }
    return out;
}

std::vector<Music> read_abc_file(const std::filesystem::path& path, Diagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    auto tunes = read_abc(buffer.str(), diag);
    for (auto& music : tunes) music.metadata.source_filename = path.filename().string();
    return tunes;
}

}  // namespace musekit
