#include "musekit/representations.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace musekit {

namespace {

struct Boundary {
    Tick tick;
    int klass;  // 0 note-off, 1 note-on, 2 zero-duration note-off
    int pitch;
    int velocity;
};

std::vector<Boundary> note_boundaries(const Music& music) {
    std::vector<Boundary> boundaries;
    for (const auto& track : music.tracks) {
        for (const auto& note : track.notes) {
            boundaries.push_back({note.time, 1, note.pitch, note.velocity});
            boundaries.push_back({note.end(), note.duration == 0 ? 2 : 0, note.pitch, 0});
        }
    }
    std::stable_sort(boundaries.begin(), boundaries.end(),
                     [](const Boundary& a, const Boundary& b) {
                         if (a.tick != b.tick) return a.tick < b.tick;
                         if (a.klass != b.klass) return a.klass < b.klass;
                         return a.pitch < b.pitch;
                     });
    return boundaries;
}

void emit_time_shift(Tick delta, const EventConfig& config,
                     std::vector<std::int32_t>& tokens) {
    while (delta > 0) {
        Tick step = std::min<Tick>(delta, config.max_time_shift);
        tokens.push_back(std::int32_t(255 + step));
        delta -= step;
    }
}

// single track holding every note of the music, in sorted order
Track merged_track(const Music& music) {
    Track merged;
    for (const auto& track : music.tracks)
        merged.notes.insert(merged.notes.end(), track.notes.begin(), track.notes.end());
    std::stable_sort(merged.notes.begin(), merged.notes.end(),
                     [](const Note& a, const Note& b) {
                         if (a.time != b.time) return a.time < b.time;
                         return a.pitch < b.pitch;
                     });
    return merged;
}

Tick effective_end(const Music& music) {
    Tick end = 0;
    for (const auto& track : music.tracks)
        for (const auto& note : track.notes)
            end = std::max(end, note.time + std::max<Tick>(note.duration, 1));
    return end;
}

}  // namespace

EncodedSequence encode_event(const Music& music, const EventConfig& config) {
    ensure_valid(music);
    EncodedSequence seq;
    seq.kind = SequenceKind::event;
    seq.config = config;
    seq.resolution = music.resolution;
    seq.vocabulary = config.vocabulary();

    Tick cursor = 0;
    int current_bin = -1;
    for (const auto& b : note_boundaries(music)) {
        emit_time_shift(b.tick - cursor, config, seq.tokens);
        cursor = b.tick;
        if (b.klass == 1) {
            if (config.use_velocity) {
                int bin = std::min(b.velocity * config.velocity_bins / 128,
                                   config.velocity_bins - 1);
                if (bin != current_bin) {
                    seq.tokens.push_back(std::int32_t(config.velocity_base() + bin));
                    current_bin = bin;
                }
            }
            seq.tokens.push_back(std::int32_t(b.pitch));
        } else {
            seq.tokens.push_back(std::int32_t(128 + b.pitch));
        }
    }
    if (config.use_end_of_sequence)
        seq.tokens.push_back(std::int32_t(config.end_of_sequence_id()));
    return seq;
}

Music decode_event(const EncodedSequence& seq, Diagnostics* diag) {
    if (seq.kind != SequenceKind::event)
        throw Error(errc::invalid_argument, "sequence does not use the event layout");
    const EventConfig& config = seq.config;
    const int vocabulary = config.vocabulary();
    Music music;
    music.resolution = seq.resolution;
    music.tracks.push_back(Track{});
    auto& notes = music.tracks[0].notes;

    struct Open {
        Tick start;
        int velocity;
    };
    std::map<int, std::deque<Open>> open;
    Tick cursor = 0;
    int velocity = 64;

    for (std::int32_t token : seq.tokens) {
        if (token < 0 || token >= vocabulary)
            throw Error(errc::domain, "token " + std::to_string(token) +
                                          " outside the vocabulary of " +
                                          std::to_string(vocabulary));
        if (token < 128) {
            open[token].push_back({cursor, velocity});
        } else if (token < 256) {
            int pitch = token - 128;
            auto it = open.find(pitch);
            if (it == open.end() || it->second.empty()) {
                if (diag) diag->add("orphan_note_off");
                continue;
            }
            Open started = it->second.front();
            it->second.pop_front();
            notes.push_back(Note{started.start, pitch, cursor - started.start,
                                 started.velocity});
        } else if (token < 256 + config.max_time_shift) {
            cursor += token - 255;
        } else if (config.use_velocity && token < config.velocity_base() + config.velocity_bins) {
            int bin = token - config.velocity_base();
            velocity = bin * 128 / config.velocity_bins + 128 / config.velocity_bins / 2;
        } else {
            break;  // end of sequence
        }
    }
    for (auto& [pitch, fifo] : open)
        for (const auto& started : fifo) {
            if (diag) diag->add("note_on_without_off");
            notes.push_back(Note{started.start, pitch, cursor - started.start,
                                 started.velocity});
        }
    return sort(std::move(music));
}

EncodedSequence encode_pitch(const Music& music, OverlapPolicy policy,
                             std::optional<Tick> length) {
    ensure_valid(music);
    Track merged = merged_track(music);

    // resolve overlaps note-wise before rasterizing
    std::vector<Note> line;
    for (const auto& note : merged.notes) {
        if (!line.empty() && note.time < line.back().end()) {
            switch (policy) {
                case OverlapPolicy::error:
                    throw Error(errc::domain,
                                "polyphony at tick " + std::to_string(note.time) +
                                    ": pitch " + std::to_string(note.pitch) + " overlaps " +
                                    std::to_string(line.back().pitch));
                case OverlapPolicy::skip_new:
                    continue;
                case OverlapPolicy::keep_highest:
                    if (note.pitch <= line.back().pitch) continue;
                    line.back().duration = note.time - line.back().time;
                    if (line.back().duration == 0) line.pop_back();
                    break;
            }
        }
        line.push_back(note);
    }

    EncodedSequence seq;
    seq.kind = SequenceKind::pitch;
    seq.resolution = music.resolution;
    seq.vocabulary = kPitchVocabulary;
    Tick steps = length.value_or(effective_end(music));
    seq.tokens.assign(std::size_t(std::max<Tick>(steps, 0)), kPitchRest);
    for (const auto& note : line) {
        Tick end = note.time + std::max<Tick>(note.duration, 1);
        for (Tick t = note.time; t < end && t < steps; ++t)
            seq.tokens[std::size_t(t)] = t == note.time ? note.pitch : kPitchHold;
    }
    return seq;
}

Music decode_pitch(const EncodedSequence& seq) {
    if (seq.kind != SequenceKind::pitch)
        throw Error(errc::invalid_argument, "sequence does not use the pitch layout");
    Music music;
    music.resolution = seq.resolution;
    music.tracks.push_back(Track{});
    auto& notes = music.tracks[0].notes;

    std::optional<std::size_t> active;  // index of the sounding note
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
        std::int32_t token = seq.tokens[t];
        if (token < 0 || token >= kPitchVocabulary)
            throw Error(errc::domain, "token " + std::to_string(token) +
                                          " outside the pitch vocabulary of 130");
        if (token == kPitchHold) {
            if (!active)
                throw Error(errc::domain,
                            "hold token at step " + std::to_string(t) + " with no active note");
            ++notes[*active].duration;
        } else if (token == kPitchRest) {
            active.reset();
        } else {
            notes.push_back(Note{Tick(t), int(token), 1, 64});
            active = notes.size() - 1;
        }
    }
    return music;
}

PianoRoll encode_pianoroll(const Music& music, PianoRollMode mode) {
    ensure_valid(music);
    PianoRoll roll;
    roll.mode = mode;
    roll.resolution = music.resolution;
    roll.steps = std::size_t(effective_end(music));
    roll.cells.assign(roll.steps * 128, 0);
    for (const auto& track : music.tracks)
        for (const auto& note : track.notes) {
            Tick end = note.time + std::max<Tick>(note.duration, 1);
            std::uint8_t value =
                mode == PianoRollMode::binary ? 1 : std::uint8_t(note.velocity);
            for (Tick t = note.time; t < end; ++t)
                roll.at(std::size_t(t), note.pitch) =
                    std::max(roll.at(std::size_t(t), note.pitch), value);
        }
    return roll;
}

Music decode_pianoroll(const PianoRoll& roll) {
    Music music;
    music.resolution = roll.resolution;
    music.tracks.push_back(Track{});
    auto& notes = music.tracks[0].notes;
    for (int pitch = 0; pitch < 128; ++pitch) {
        std::size_t t = 0;
        while (t < roll.steps) {
            if (roll.at(t, pitch) == 0) {
                ++t;
                continue;
            }
            std::size_t start = t;
            std::uint8_t first = roll.at(t, pitch);
            while (t < roll.steps && roll.at(t, pitch) != 0) ++t;
            notes.push_back(Note{Tick(start), pitch, Tick(t - start),
                                 roll.mode == PianoRollMode::binary ? 64 : int(first)});
        }
    }
    return sort(std::move(music));
}

NoteTable encode_notes(const Music& music) {
    ensure_valid(music);
    NoteTable table;
    table.resolution = music.resolution;
    table.rows = merged_track(music).notes;
    return table;
}

Music decode_notes(const NoteTable& table) {
    Music music;
    music.resolution = table.resolution;
    music.tracks.push_back(Track{});
    for (const auto& row : table.rows) {
        if (row.pitch < 0 || row.pitch > 127 || row.velocity < 0 || row.velocity > 127 ||
            row.time < 0 || row.duration < 0)
            throw Error(errc::domain,
                        "note row out of range: time " + std::to_string(row.time) +
                            ", pitch " + std::to_string(row.pitch) + ", duration " +
                            std::to_string(row.duration) + ", velocity " +
                            std::to_string(row.velocity));
        music.tracks[0].notes.push_back(row);
    }
    return sort(std::move(music));
}

}  // namespace musekit
