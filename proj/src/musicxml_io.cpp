#include "musekit/musicxml_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "archive.hpp"
#include "text_util.hpp"
#include "xml.hpp"

namespace musekit {

namespace {

int semitone(char step) {
    switch (step) {
        case 'C': return 0;
        case 'D': return 2;
        case 'E': return 4;
        case 'F': return 5;
        case 'G': return 7;
        case 'A': return 9;
        case 'B': return 11;
    }
    throw Error(errc::domain, std::string("invalid pitch step '") + step + "'");
}

}  // namespace

int pitch_to_midi(char step, int alter, int octave) {
    int value = (octave + 1) * 12 + semitone(step) + alter;
    if (value < 0 || value > 127)
        throw Error(errc::domain, "pitch " + std::string(1, step) + (alter ? "*" : "") +
                                      std::to_string(octave) + " maps to " +
                                      std::to_string(value) + ", outside [0, 127]");
    return value;
}

namespace {

int parse_int(std::string_view text, const char* what) {
    try {
        std::size_t used = 0;
        int value = std::stoi(std::string(text), &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return value;
    } catch (const std::exception&) {
        throw Error(errc::schema,
                    std::string(what) + " must be an integer, got \"" + std::string(text) + "\"");
    }
}

double parse_real(std::string_view text, const char* what) {
    try {
        std::size_t used = 0;
        double value = std::stod(std::string(text), &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return value;
    } catch (const std::exception&) {
        throw Error(errc::schema,
                    std::string(what) + " must be a number, got \"" + std::string(text) + "\"");
    }
}

int dynamics_to_velocity(double dynamics) {
    // sound dynamics are a percentage of the MIDI forte value 90
    return std::clamp(int(std::llround(dynamics * 90.0 / 100.0)), 0, 127);
}

int fifths_to_root(int fifths, Mode mode) {
    int base = mode == Mode::minor ? 9 : 0;
    return ((base + fifths * 7) % 12 + 12) % 12;
}

double beat_unit_quarters(std::string_view unit) {
    if (unit == "whole") return 4.0;
    if (unit == "half") return 2.0;
    if (unit == "quarter") return 1.0;
    if (unit == "eighth") return 0.5;
    if (unit == "16th") return 0.25;
    if (unit == "32nd") return 0.125;
    return 1.0;
}

struct PartInfo {
    std::string id;
    std::optional<std::string> name;
    int program = 0;
    bool is_drum = false;
};

class MusicXmlReader {
public:
    explicit MusicXmlReader(Diagnostics* diag) : diag_(diag) {}

    Music read(std::string_view text) {
        xml::Node root = xml::parse(text);
        if (root.name == "score-timewise")
            throw Error(errc::unsupported, "score-timewise documents are not supported");
        if (root.name != "score-partwise")
            throw Error(errc::schema, "expected a score-partwise document, got <" +
                                          root.name + ">");

        read_metadata(root);
        auto part_infos = read_part_list(root);
        auto parts = root.all("part");

        // resolution = lcm of every divisions declaration in the document
        std::int64_t resolution = 1;
        for (const auto* part : parts)
            for (const auto& measure : part->children)
                for (const auto& child : measure.children)
                    if (child.name == "attributes")
                        if (const auto* divisions = child.child("divisions")) {
                            int d = parse_int(divisions->text, "divisions");
                            if (d < 1)
                                throw Error(errc::schema, "divisions must be >= 1, got " +
                                                              std::to_string(d));
                            resolution = std::lcm(resolution, std::int64_t(d));
                            if (resolution > 1'000'000)
                                throw Error(errc::unsupported,
                                            "combined divisions are finer than supported");
                        }
        music_.resolution = int(resolution);

        for (const auto* part : parts) {
            PartInfo info;
            auto id = part->attribute("id");
            for (const auto& candidate : part_infos)
                if (id && candidate.id == *id) info = candidate;
            read_part(*part, info);
        }

        for (const auto& [time, qpm] : tempos_) music_.tempos.push_back({time, qpm});
        for (const auto& [time, key] : keys_)
            music_.key_signatures.push_back({time, key.first, key.second});
        for (const auto& [time, ts] : time_signatures_)
            music_.time_signatures.push_back({time, ts.first, ts.second});
        music_.metadata.source_format = "musicxml";
        Music out = sort(std::move(music_));
        ensure_valid(out);
        return out;
    }

private:
    void read_metadata(const xml::Node& root) {
        if (const auto* work = root.child("work"))
            if (const auto* title = work->child("work-title"))
                if (!title->text.empty())
                    music_.metadata.title = to_valid_utf8(title->text);
        if (const auto* movement = root.child("movement-title"))
            if (!music_.metadata.title && !movement->text.empty())
                music_.metadata.title = to_valid_utf8(movement->text);
        if (const auto* identification = root.child("identification")) {
            for (const auto* creator : identification->all("creator"))
                if (!creator->text.empty())
                    music_.metadata.creators.push_back(to_valid_utf8(creator->text));
            if (const auto* rights = identification->child("rights"))
                if (!rights->text.empty())
                    music_.metadata.copyright = to_valid_utf8(rights->text);
        }
    }

    std::vector<PartInfo> read_part_list(const xml::Node& root) {
        std::vector<PartInfo> infos;
        const auto* list = root.child("part-list");
        if (!list) return infos;
        for (const auto* sp : list->all("score-part")) {
            PartInfo info;
            if (auto id = sp->attribute("id")) info.id = *id;
            if (const auto* name = sp->child("part-name"))
                if (!name->text.empty()) info.name = to_valid_utf8(name->text);
            if (const auto* instrument = sp->child("midi-instrument")) {
                if (const auto* channel = instrument->child("midi-channel"))
                    info.is_drum = parse_int(channel->text, "midi-channel") == 10;
                if (const auto* program = instrument->child("midi-program"))
                    info.program =
                        std::clamp(parse_int(program->text, "midi-program") - 1, 0, 127);
            }
            infos.push_back(std::move(info));
        }
        return infos;
    }

    void read_part(const xml::Node& part, const PartInfo& info) {
        Track track;
        track.name = info.name;
        track.program = info.program;
        track.is_drum = info.is_drum;

        divisions_ = 0;  // must be declared before the first duration
        tick_ = 0;
        velocity_ = 64;
        prev_onset_ = 0;
        prev_duration_ = 0;
        pending_ties_.clear();

        for (const auto& measure : part.children) {
            if (measure.name != "measure") {
                warn("element_" + measure.name + "_skipped");
                continue;
            }
            Tick measure_start = tick_;
            Tick reach = tick_;  // furthest position any voice reached
            for (const auto& item : measure.children) {
                if (item.name == "attributes") {
                    read_attributes(item);
                } else if (item.name == "note") {
                    read_note(item, track, measure_start);
                } else if (item.name == "backup") {
                    Tick amount = duration_ticks(item, "backup");
                    tick_ -= amount;
                    if (tick_ < measure_start) {
                        warn("backup_before_measure_clamped");
                        tick_ = measure_start;
                    }
                } else if (item.name == "forward") {
                    tick_ += duration_ticks(item, "forward");
                } else if (item.name == "direction") {
                    read_direction(item);
                } else if (item.name == "sound") {
                    read_sound(item);
                } else if (item.name == "barline") {
                    if (item.child("repeat") || item.child("ending"))
                        warn("repeat_discarded");
                } else if (item.name == "harmony" || item.name == "print" ||
                           item.name == "figured-bass" || item.name == "grouping" ||
                           item.name == "bookmark" || item.name == "link") {
                    if (item.name == "harmony") warn("harmony_skipped");
                } else {
                    warn("element_" + item.name + "_skipped");
                }
                reach = std::max(reach, tick_);
            }
            tick_ = reach;  // measures hand over at their furthest voice
        }
        music_.tracks.push_back(std::move(track));
    }

    void read_attributes(const xml::Node& attributes) {
        if (const auto* divisions = attributes.child("divisions"))
            divisions_ = parse_int(divisions->text, "divisions");
        if (const auto* key = attributes.child("key")) {
            if (const auto* fifths = key->child("fifths")) {
                int f = parse_int(fifths->text, "fifths");
                Mode mode = key->child_text("mode") == "minor" ? Mode::minor : Mode::major;
                keys_[tick_] = {fifths_to_root(f, mode), mode};
            }
        }
        if (const auto* time = attributes.child("time")) {
            const auto* beats = time->child("beats");
            const auto* beat_type = time->child("beat-type");
            if (beats && beat_type)
                time_signatures_[tick_] = {parse_int(beats->text, "beats"),
                                           parse_int(beat_type->text, "beat-type")};
        }
    }

    void read_direction(const xml::Node& direction) {
        for (const auto* type : direction.all("direction-type")) {
            if (const auto* metronome = type->child("metronome")) {
                const auto* unit = metronome->child("beat-unit");
                const auto* per_minute = metronome->child("per-minute");
                if (unit && per_minute) {
                    double quarters = beat_unit_quarters(unit->text);
                    if (metronome->child("beat-unit-dot")) quarters *= 1.5;
                    char* end = nullptr;
                    double value = std::strtod(per_minute->text.c_str(), &end);
                    if (end != per_minute->text.c_str() && value > 0)
                        tempos_[tick_] = value * quarters;
                    else
                        warn("metronome_text_skipped");
                }
            }
        }
        if (const auto* sound = direction.child("sound")) read_sound(*sound);
    }

    void read_sound(const xml::Node& sound) {
        if (auto tempo = sound.attribute("tempo")) {
            double qpm = parse_real(*tempo, "sound tempo");
            if (qpm > 0) tempos_[tick_] = qpm;
        }
        if (auto dynamics = sound.attribute("dynamics"))
            velocity_ = dynamics_to_velocity(parse_real(*dynamics, "sound dynamics"));
    }

    Tick duration_ticks(const xml::Node& node, const char* what) {
        const auto* duration = node.child("duration");
        if (!duration)
            throw Error(errc::schema, std::string(what) + " without a duration element");
        if (divisions_ < 1)
            throw Error(errc::schema, "duration before any divisions declaration");
        int value = parse_int(duration->text, "duration");
        if (value < 0) throw Error(errc::schema, "duration must be >= 0");
        return Tick(value) * (music_.resolution / divisions_);
    }

    void read_note(const xml::Node& note, Track& track, Tick measure_start) {
        (void)measure_start;
        if (note.child("grace")) {
            warn("grace_note_skipped");
            return;
        }
        bool is_chord = note.child("chord") != nullptr;
        bool is_rest = note.child("rest") != nullptr;
        bool is_cue = note.child("cue") != nullptr;
        Tick duration = duration_ticks(note, "note");

        Tick onset = is_chord ? prev_onset_ : tick_;
        if (!is_chord) {
            prev_onset_ = tick_;
            prev_duration_ = duration;
            tick_ += duration;
        }
        if (is_rest) return;
        if (is_cue) {
            warn("cue_note_skipped");
            return;
        }

        int midi_pitch;
        if (const auto* pitch = note.child("pitch")) {
            const auto* step = pitch->child("step");
            const auto* octave = pitch->child("octave");
            if (!step || step->text.empty() || !octave)
                throw Error(errc::schema, "pitch element missing step or octave");
            int alter = 0;
            if (const auto* alter_node = pitch->child("alter"))
                alter = int(std::llround(parse_real(alter_node->text, "alter")));
            midi_pitch =
                pitch_to_midi(step->text[0], alter, parse_int(octave->text, "octave"));
        } else if (const auto* unpitched = note.child("unpitched")) {
            const auto* step = unpitched->child("display-step");
            const auto* octave = unpitched->child("display-octave");
            midi_pitch = (step && octave && !step->text.empty())
                             ? pitch_to_midi(step->text[0], 0,
                                             parse_int(octave->text, "octave"))
                             : 60;
        } else {
            throw Error(errc::schema, "note is neither pitched, unpitched nor a rest");
        }

        int velocity = velocity_;
        if (auto dynamics = note.attribute("dynamics"))
            velocity = dynamics_to_velocity(parse_real(*dynamics, "note dynamics"));

        bool tie_start = false, tie_stop = false;
        for (const auto* tie : note.all("tie")) {
            auto type = tie->attribute("type");
            if (type == "start") tie_start = true;
            if (type == "stop") tie_stop = true;
        }

        if (const auto* lyric = note.child("lyric"))
            if (const auto* text = lyric->child("text"))
                if (!text->text.empty())
                    track.lyrics.push_back({onset, to_valid_utf8(text->text)});

        if (tie_stop) {
            auto pending = pending_ties_.find(midi_pitch);
            if (pending != pending_ties_.end()) {
                Note& held = track.notes[pending->second];
                held.duration = onset + duration - held.time;
                if (!tie_start) pending_ties_.erase(pending);
                return;
            }
            warn("tie_stop_without_start");
        }
        track.notes.push_back(Note{onset, midi_pitch, duration, velocity});
        if (tie_start) pending_ties_[midi_pitch] = track.notes.size() - 1;
    }

    void warn(const std::string& key) {
        if (diag_) diag_->add(key);
    }

    Music music_;
    Diagnostics* diag_;
    std::map<Tick, double> tempos_;                       // later wins at equal ticks
    std::map<Tick, std::pair<int, Mode>> keys_;           // deduped across parts
    std::map<Tick, std::pair<int, int>> time_signatures_;

    int divisions_ = 0;
    Tick tick_ = 0;
    int velocity_ = 64;
    Tick prev_onset_ = 0;
    Tick prev_duration_ = 0;
    std::map<int, std::size_t> pending_ties_;
};

}  // namespace

Music read_musicxml(std::string_view text, Diagnostics* diag) {
    return MusicXmlReader(diag).read(text);
}

Music read_mxl(std::span<const std::uint8_t> bytes, Diagnostics* diag) {
    archive::Bytes buffer(bytes.begin(), bytes.end());
    auto entries = archive::read_zip(buffer);
    const auto* container = archive::find_entry(entries, "META-INF/container.xml");
    if (!container)
        throw Error(errc::archive, "mxl archive has no META-INF/container.xml");
    xml::Node manifest = xml::parse(
        std::string_view(reinterpret_cast<const char*>(container->data.data()),
                         container->data.size()));
    const xml::Node* rootfiles = manifest.child("rootfiles");
    const xml::Node* rootfile = rootfiles ? rootfiles->child("rootfile") : nullptr;
    auto path = rootfile ? rootfile->attribute("full-path") : std::nullopt;
    if (!path) throw Error(errc::archive, "mxl container.xml names no rootfile");
    const auto* score = archive::find_entry(entries, *path);
    if (!score)
        throw Error(errc::archive, "mxl rootfile \"" + std::string(*path) +
                                       "\" is missing from the archive");
    return read_musicxml(std::string_view(reinterpret_cast<const char*>(score->data.data()),
                                          score->data.size()),
                         diag);
}

// ---------------------------------------------------------------------------
// writer

namespace {

const char* kStepNames[] = {"C", "C", "D", "D", "E", "F", "F", "G", "G", "A", "A", "B"};
const int kStepAlters[] = {0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0};

std::string format_dynamics(int velocity) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.4f", velocity * 100.0 / 90.0);
    return buffer;
}

std::string format_tempo(double qpm) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%g", qpm);
    return buffer;
}

struct Segment {
    Tick time;
    Tick duration;
    int pitch;
    int velocity;
    bool tie_start;
    bool tie_stop;
};

struct Measure {
    Tick start;
    Tick length;
    Tick end() const { return start + length; }
};

std::vector<Measure> build_measures(const Music& music) {
    // cover every dated event, not just notes, so nothing falls off the grid
    Tick total = end_time(music);
    for (const auto& tempo : music.tempos) total = std::max(total, tempo.time + 1);
    for (const auto& key : music.key_signatures) total = std::max(total, key.time + 1);
    for (const auto& ts : music.time_signatures) total = std::max(total, ts.time + 1);
    total = std::max<Tick>(total, 1);
    std::vector<TimeSignature> sigs = music.time_signatures;
    std::vector<Measure> measures;
    std::size_t idx = 0;
    TimeSignature active{0, 4, 4};
    Tick cursor = 0;
    while (cursor < total) {
        while (idx < sigs.size() && sigs[idx].time <= cursor) active = sigs[idx++];
        Tick length = std::max<Tick>(
            1, Tick(active.numerator) * 4 * music.resolution / active.denominator);
        if (idx < sigs.size() && sigs[idx].time < cursor + length)
            length = std::max<Tick>(1, sigs[idx].time - cursor);
        measures.push_back({cursor, length});
        cursor += length;
    }
    return measures;
}

std::vector<std::vector<Segment>> split_into_measures(const Track& track,
                                                      const std::vector<Measure>& measures) {
    std::vector<std::vector<Segment>> per_measure(measures.size());
    auto measure_of = [&](Tick t) {
        std::size_t lo = 0, hi = measures.size();
        while (lo + 1 < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (measures[mid].start <= t) lo = mid;
            else hi = mid;
        }
        return lo;
    };
    for (const auto& note : track.notes) {
        std::size_t m = measure_of(note.time);
        Tick at = note.time;
        Tick remaining = note.duration;
        bool first = true;
        while (true) {
            Tick slice = std::min(remaining, measures[m].end() - at);
            bool last = at + slice >= note.end();
            per_measure[m].push_back(Segment{at, slice, note.pitch, note.velocity,
                                             !last, !first});
            if (last) break;
            at += slice;
            remaining -= slice;
            ++m;
            first = false;
        }
    }
    return per_measure;
}

class MusicXmlWriter {
public:
    std::string write(const Music& input) {
        ensure_valid(input);
        Music music = sort(input);
        measures_ = build_measures(music);

        xml::Node root;
        root.name = "score-partwise";
        root.attributes.emplace_back("version", "3.1");

        if (music.metadata.title) {
            xml::Node work;
            work.name = "work";
            work.children.push_back(text_node("work-title", *music.metadata.title));
            root.children.push_back(std::move(work));
        }
        if (!music.metadata.creators.empty() || music.metadata.copyright) {
            xml::Node identification;
            identification.name = "identification";
            for (const auto& creator : music.metadata.creators) {
                xml::Node node = text_node("creator", creator);
                node.attributes.emplace_back("type", "composer");
                identification.children.push_back(std::move(node));
            }
            if (music.metadata.copyright)
                identification.children.push_back(
                    text_node("rights", *music.metadata.copyright));
            root.children.push_back(std::move(identification));
        }

        // a score needs at least one part
        std::size_t parts = std::max<std::size_t>(music.tracks.size(), 1);
        xml::Node part_list;
        part_list.name = "part-list";
        for (std::size_t i = 0; i < parts; ++i) {
            const Track* track = i < music.tracks.size() ? &music.tracks[i] : nullptr;
            xml::Node sp;
            sp.name = "score-part";
            std::string id = "P" + std::to_string(i + 1);
            sp.attributes.emplace_back("id", id);
            sp.children.push_back(text_node(
                "part-name", track && track->name ? *track->name : std::string()));
            if (track) {
                xml::Node instrument;
                instrument.name = "midi-instrument";
                instrument.attributes.emplace_back("id", id + "-I1");
                instrument.children.push_back(text_node(
                    "midi-channel", std::to_string(track->is_drum ? 10 : int(i % 9) + 1)));
                instrument.children.push_back(
                    text_node("midi-program", std::to_string(track->program + 1)));
                sp.children.push_back(std::move(instrument));
            }
            part_list.children.push_back(std::move(sp));
        }
        root.children.push_back(std::move(part_list));

        for (std::size_t i = 0; i < parts; ++i) {
            const Track* track = i < music.tracks.size() ? &music.tracks[i] : nullptr;
            root.children.push_back(write_part(music, track, i));
        }
        return xml::write(root);
    }

private:
    static xml::Node text_node(std::string name, std::string text) {
        xml::Node node;
        node.name = std::move(name);
        node.text = std::move(text);
        return node;
    }

    xml::Node duration_node(const char* name, Tick amount) {
        xml::Node node;
        node.name = name;
        node.children.push_back(text_node("duration", std::to_string(amount)));
        return node;
    }

    xml::Node write_part(const Music& music, const Track* track, std::size_t index) {
        xml::Node part;
        part.name = "part";
        part.attributes.emplace_back("id", "P" + std::to_string(index + 1));

        Track empty;
        auto per_measure = split_into_measures(track ? *track : empty, measures_);

        // content items shared by position: attributes, directions, notes
        struct Item {
            Tick time;
            int klass;  // 0 attributes, 1 direction, 2 note
            std::size_t payload;
        };

        for (std::size_t m = 0; m < measures_.size(); ++m) {
            const Measure& measure = measures_[m];
            xml::Node node;
            node.name = "measure";
            node.attributes.emplace_back("number", std::to_string(m + 1));

            std::vector<Item> items;
            for (const auto& key : music.key_signatures)
                if (key.time >= measure.start && key.time < measure.end())
                    items.push_back({key.time, 0, std::size_t(&key - music.key_signatures.data())});
            for (const auto& ts : music.time_signatures)
                if (ts.time >= measure.start && ts.time < measure.end())
                    items.push_back(
                        {ts.time, 0, std::size_t(&ts - music.time_signatures.data()) | 0x80000000});
            if (index == 0)  // tempo directions live in the first part only
                for (const auto& tempo : music.tempos)
                    if (tempo.time >= measure.start && tempo.time < measure.end())
                        items.push_back(
                            {tempo.time, 1, std::size_t(&tempo - music.tempos.data())});
            auto& segments = per_measure[m];
            std::stable_sort(segments.begin(), segments.end(),
                             [](const Segment& a, const Segment& b) {
                                 if (a.time != b.time) return a.time < b.time;
                                 return a.pitch < b.pitch;
                             });
            for (std::size_t s = 0; s < segments.size(); ++s)
                items.push_back({segments[s].time, 2, s});
            std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
                if (a.time != b.time) return a.time < b.time;
                return a.klass < b.klass;
            });

            Tick current = measure.start;
            bool divisions_pending = m == 0;
            const Segment* previous_note = nullptr;
            for (const auto& item : items) {
                if (item.klass == 2) {
                    const Segment& segment = segments[item.payload];
                    bool chord = previous_note && previous_note->time == segment.time &&
                                 previous_note->duration == segment.duration &&
                                 current == segment.time + segment.duration;
                    if (!chord) move_cursor(node, current, segment.time);
                    node.children.push_back(note_node(segment, chord));
                    current = segment.time + segment.duration;
                    previous_note = &segment;
                    continue;
                }
                move_cursor(node, current, item.time);
                previous_note = nullptr;
                if (item.klass == 1) {
                    xml::Node direction;
                    direction.name = "direction";
                    xml::Node sound;
                    sound.name = "sound";
                    sound.attributes.emplace_back(
                        "tempo", format_tempo(music.tempos[item.payload].qpm));
                    direction.children.push_back(std::move(sound));
                    node.children.push_back(std::move(direction));
                } else {
                    node.children.push_back(
                        attributes_node(music, item.payload, divisions_pending));
                    divisions_pending = false;
                }
            }
            if (divisions_pending) {
                xml::Node attributes;
                attributes.name = "attributes";
                attributes.children.push_back(
                    text_node("divisions", std::to_string(music.resolution)));
                node.children.insert(node.children.begin(), std::move(attributes));
                divisions_pending = false;
            }
            move_cursor(node, current, measure.end());
            part.children.push_back(std::move(node));
        }
        return part;
    }

    void move_cursor(xml::Node& measure, Tick& current, Tick target) {
        if (target > current) measure.children.push_back(duration_node("forward", target - current));
        else if (target < current) measure.children.push_back(duration_node("backup", current - target));
        current = target;
    }

    xml::Node attributes_node(const Music& music, std::size_t payload, bool with_divisions) {
        xml::Node attributes;
        attributes.name = "attributes";
        if (with_divisions)
            attributes.children.push_back(
                text_node("divisions", std::to_string(music.resolution)));
        if (payload & 0x80000000) {
            const auto& ts = music.time_signatures[payload & 0x7FFFFFFF];
            xml::Node time;
            time.name = "time";
            time.children.push_back(text_node("beats", std::to_string(ts.numerator)));
            time.children.push_back(text_node("beat-type", std::to_string(ts.denominator)));
            attributes.children.push_back(std::move(time));
        } else {
            const auto& key = music.key_signatures[payload];
            int relative = key.mode == Mode::minor ? (key.root + 3) % 12 : key.root;
            int fifths = relative * 7 % 12;
            if (fifths > 6) fifths -= 12;
            xml::Node key_node;
            key_node.name = "key";
            key_node.children.push_back(text_node("fifths", std::to_string(fifths)));
            key_node.children.push_back(
                text_node("mode", key.mode == Mode::minor ? "minor" : "major"));
            attributes.children.push_back(std::move(key_node));
        }
        return attributes;
    }

    xml::Node note_node(const Segment& segment, bool chord) {
        xml::Node note;
        note.name = "note";
        note.attributes.emplace_back("dynamics", format_dynamics(segment.velocity));
        if (chord) {
            xml::Node marker;
            marker.name = "chord";
            note.children.push_back(std::move(marker));
        }
        xml::Node pitch;
        pitch.name = "pitch";
        int pc = segment.pitch % 12;
        pitch.children.push_back(text_node("step", kStepNames[pc]));
        if (kStepAlters[pc])
            pitch.children.push_back(text_node("alter", std::to_string(kStepAlters[pc])));
        pitch.children.push_back(text_node("octave", std::to_string(segment.pitch / 12 - 1)));
        note.children.push_back(std::move(pitch));
        note.children.push_back(text_node("duration", std::to_string(segment.duration)));
        if (segment.tie_stop) {
            xml::Node tie;
            tie.name = "tie";
            tie.attributes.emplace_back("type", "stop");
            note.children.push_back(std::move(tie));
        }
        if (segment.tie_start) {
            xml::Node tie;
            tie.name = "tie";
            tie.attributes.emplace_back("type", "start");
            note.children.push_back(std::move(tie));
        }
        note.children.push_back(text_node("voice", "1"));
        return note;
    }

    std::vector<Measure> measures_;
};

}  // namespace

std::string write_musicxml(const Music& music) {
    return MusicXmlWriter().write(music);
}

Music read_musicxml_file(const std::filesystem::path& path, Diagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    Music music = read_musicxml(buffer.str(), diag);
    music.metadata.source_filename = path.filename().string();
    return music;
}

Music read_mxl_file(const std::filesystem::path& path, Diagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    Music music = read_mxl(bytes, diag);
    music.metadata.source_filename = path.filename().string();
    return music;
}

void write_musicxml_file(const Music& music, const std::filesystem::path& path) {
    std::string text = write_musicxml(music);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) throw Error(errc::io, "failed writing " + path.string());
}

}  // namespace musekit
