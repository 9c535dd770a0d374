#include "musekit/midi_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "text_util.hpp"

namespace musekit {

VlqResult read_vlq(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t value = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (offset + i >= bytes.size())
            throw Error(errc::parse, "truncated input while reading variable-length quantity");
        std::uint8_t byte = bytes[offset + i];
        value = (value << 7) | (byte & 0x7F);
        if ((byte & 0x80) == 0) return {value, i + 1};
    }
    throw Error(errc::parse, "malformed variable-length quantity: no terminator in 4 bytes");
}

void write_vlq(std::uint32_t value, Bytes& out) {
    if (value >= (1u << 28))
        throw Error(errc::invalid_argument,
                    "value " + std::to_string(value) + " exceeds the 4-byte VLQ range");
    std::uint8_t groups[4];
    int count = 0;
    do {
        groups[count++] = std::uint8_t(value & 0x7F);
        value >>= 7;
    } while (value != 0);
    for (int i = count - 1; i > 0; --i) out.push_back(groups[i] | 0x80);
    out.push_back(groups[0]);
}

namespace {

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::size_t pos = 0)
        : bytes_(bytes), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    bool done() const { return pos_ >= bytes_.size(); }

    std::uint8_t u8(const char* what) {
        require(1, what);
        return bytes_[pos_++];
    }

    std::uint16_t u16be(const char* what) {
        require(2, what);
        std::uint16_t v = std::uint16_t(bytes_[pos_] << 8 | bytes_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32be(const char* what) {
        require(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        require(n, what);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint32_t vlq() {
        auto [value, consumed] = read_vlq(bytes_, pos_);
        pos_ += consumed;
        return value;
    }

private:
    void require(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size())
            throw Error(errc::parse, std::string("truncated input while reading ") + what);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
};

struct OpenNote {
    Tick start;
    int velocity;
};

class MidiParser {
public:
    explicit MidiParser(Diagnostics* diag) : diag_(diag) {}

    Music parse(std::span<const std::uint8_t> bytes) {
        ByteReader reader(bytes);
        auto magic = reader.take(4, "header magic");
        if (!std::equal(magic.begin(), magic.end(), "MThd"))
            throw Error(errc::parse, "not a standard MIDI file: bad MThd magic");
        std::uint32_t header_length = reader.u32be("header length");
        if (header_length < 6) throw Error(errc::parse, "MThd chunk shorter than 6 bytes");
        std::uint16_t format = reader.u16be("format");
        std::uint16_t declared_tracks = reader.u16be("track count");
        (void)declared_tracks;
        std::uint16_t division = reader.u16be("division");
        if (header_length > 6) reader.take(header_length - 6, "header padding");
        if (format > 1)
            throw Error(errc::unsupported,
                        "SMF format " + std::to_string(format) + " is not supported");
        if (division & 0x8000)
            throw Error(errc::unsupported, "SMPTE division is not supported");
        if (division == 0) throw Error(errc::parse, "division must be positive");

        music_.resolution = division;
        music_.metadata.source_format = "midi";

        int track_index = 0;
        while (!reader.done()) {
            if (reader.remaining() < 8) {
                warn("trailing_bytes_skipped");
                break;
            }
            auto chunk_magic = reader.take(4, "chunk magic");
            std::uint32_t chunk_length = reader.u32be("chunk length");
            auto chunk = reader.take(chunk_length, "chunk body");
            if (std::equal(chunk_magic.begin(), chunk_magic.end(), "MTrk")) {
                parse_track(chunk, track_index++);
            } else {
                warn("unknown_chunk_skipped");
            }
        }

        for (auto& [key, track] : tracks_) music_.tracks.push_back(std::move(track));
        return musekit::sort(std::move(music_));
    }

private:
    void parse_track(std::span<const std::uint8_t> chunk, int track_index) {
        ByteReader reader(chunk);
        Tick tick = 0;
        std::uint8_t running_status = 0;
        int programs[16] = {};
        // (channel, pitch) -> FIFO of open note-ons
        std::map<std::pair<int, int>, std::vector<OpenNote>> open;
        std::optional<std::string> track_name;
        bool ended = false;

        while (!reader.done() && !ended) {
            tick += reader.vlq();
            std::uint8_t first = reader.u8("status byte");
            std::uint8_t status = first;
            std::uint8_t data[2] = {0, 0};
            int have = 0;
            if (first < 0x80) {  // running status: `first` is already data
                if (running_status == 0)
                    throw Error(errc::parse, "data byte with no running status");
                status = running_status;
                data[have++] = first;
            } else if (first < 0xF0) {
                running_status = first;
            } else {
                running_status = 0;  // sysex and meta events cancel running status
            }

            if (status < 0xF0) {
                const int kind = status >> 4;
                const int needed = (kind == 0xC || kind == 0xD) ? 1 : 2;
                while (have < needed) data[have++] = reader.u8("channel message data");
                handle_channel_message(kind, status & 0x0F, data, tick, track_index,
                                       programs, open);
            } else if (status == 0xFF) {
                std::uint8_t type = reader.u8("meta type");
                std::uint32_t length = reader.vlq();
                auto payload = reader.take(length, "meta payload");
                if (type == 0x2F) {
                    ended = true;
                } else {
                    handle_meta(type, payload, tick, track_name);
                }
            } else if (status == 0xF0 || status == 0xF7) {
                std::uint32_t length = reader.vlq();
                reader.take(length, "sysex payload");
                warn("sysex_skipped");
            } else {
                throw Error(errc::parse,
                            "unexpected status byte 0x" + hex_byte(status) + " in track");
            }
        }

        // close anything still sounding at the end of the track
        for (auto& [key, fifo] : open) {
            for (const auto& note : fifo) {
                warn("note_on_without_off");
                add_note(track_index, key.first, programs[key.first],
                         Note{note.start, key.second, tick - note.start, note.velocity});
            }
        }
        if (track_name) {
            for (auto& [key, track] : tracks_)
                if (key.first == track_index && !track.name) track.name = track_name;
            if (!music_.metadata.title) music_.metadata.title = track_name;
        }
    }

    void handle_channel_message(int kind, int channel, const std::uint8_t data[2], Tick tick,
                                int track_index, int programs[16],
                                std::map<std::pair<int, int>, std::vector<OpenNote>>& open) {
        switch (kind) {
            case 0x9:  // note on (velocity 0 means note off)
                if (data[1] > 0) {
                    open[{channel, data[0]}].push_back(OpenNote{tick, data[1]});
                    break;
                }
                [[fallthrough]];
            case 0x8: {  // note off: earliest unmatched note-on, same pitch+channel
                auto it = open.find({channel, data[0]});
                if (it == open.end() || it->second.empty()) {
                    warn("unmatched_note_off");
                    break;
                }
                OpenNote started = it->second.front();
                it->second.erase(it->second.begin());
                add_note(track_index, channel, programs[channel],
                         Note{started.start, data[0], tick - started.start, started.velocity});
                break;
            }
            case 0xC:
                programs[channel] = data[0] & 0x7F;
                break;
            default:
                break;  // aftertouch, controllers, pitch bend: outside the model
        }
    }

    void handle_meta(std::uint8_t type, std::span<const std::uint8_t> payload, Tick tick,
                     std::optional<std::string>& track_name) {
        switch (type) {
            case 0x51: {  // set tempo, microseconds per quarter
                if (payload.size() < 3) {
                    warn("bad_tempo_event");
                    break;
                }
                std::uint32_t micros = std::uint32_t(payload[0]) << 16 |
                                       std::uint32_t(payload[1]) << 8 | payload[2];
                if (micros == 0) {
                    warn("bad_tempo_event");
                    break;
                }
                music_.tempos.push_back(Tempo{tick, 60.0e6 / micros});
                break;
            }
            case 0x58: {  // time signature: nn dd cc bb
                if (payload.size() < 2 || payload[0] == 0 || payload[1] > 6) {
                    warn("bad_time_signature");
                    break;
                }
                music_.time_signatures.push_back(
                    TimeSignature{tick, payload[0], 1 << payload[1]});
                break;
            }
            case 0x59: {  // key signature: sf mi (counted separately; unreliable)
                warn("key_signature_events");
                if (payload.size() < 2) {
                    warn("bad_key_signature");
                    break;
                }
                int sf = std::int8_t(payload[0]);
                int mi = payload[1];
                if (sf < -7 || sf > 7 || (mi != 0 && mi != 1)) {
                    warn("bad_key_signature");
                    break;
                }
                int base = mi == 1 ? 9 : 0;  // A minor / C major under no accidentals
                int root = ((base + sf * 7) % 12 + 12) % 12;
                music_.key_signatures.push_back(
                    KeySignature{tick, root, mi == 1 ? Mode::minor : Mode::major});
                break;
            }
            case 0x03:
                if (!track_name)
                    track_name = to_valid_utf8(
                        std::string_view(reinterpret_cast<const char*>(payload.data()),
                                         payload.size()));
                break;
            default:
                break;
        }
    }

    void add_note(int track_index, int channel, int program, Note note) {
        auto key = std::make_pair(track_index, channel);
        auto it = tracks_.find(key);
        if (it == tracks_.end()) {
            Track track;
            track.program = program;
            track.is_drum = channel == 9;
            it = tracks_.emplace(key, std::move(track)).first;
        }
        it->second.notes.push_back(note);
    }

    void warn(const char* key) {
        if (diag_) diag_->add(key);
    }

    static std::string hex_byte(std::uint8_t b) {
        static const char* digits = "0123456789abcdef";
        return {digits[b >> 4], digits[b & 0xF]};
    }

    Music music_;
    std::map<std::pair<int, int>, Track> tracks_;
    Diagnostics* diag_;
};

}  // namespace

Music read_midi(std::span<const std::uint8_t> bytes, Diagnostics* diag) {
    return MidiParser(diag).parse(bytes);
}

namespace {

struct TrackEvent {
    Tick tick;
    int klass;  // 0 note-off, 1 note-on / other, 2 zero-duration note-off
    Bytes payload;
};

void flush_track(std::vector<TrackEvent>& events, Bytes& out) {
    std::stable_sort(events.begin(), events.end(), [](const TrackEvent& a, const TrackEvent& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return a.klass < b.klass;
    });
    Bytes body;
    Tick cursor = 0;
    for (const auto& event : events) {
        write_vlq(std::uint32_t(event.tick - cursor), body);
        cursor = event.tick;
        body.insert(body.end(), event.payload.begin(), event.payload.end());
    }
    // end of track
    write_vlq(0, body);
    body.insert(body.end(), {0xFF, 0x2F, 0x00});

    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    std::uint32_t length = std::uint32_t(body.size());
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(std::uint8_t(length >> shift & 0xFF));
    out.insert(out.end(), body.begin(), body.end());
}

int key_to_fifths(const KeySignature& key) {
    int relative_major = key.mode == Mode::minor ? (key.root + 3) % 12 : key.root;
    int fifths = relative_major * 7 % 12;  // 7 is the mod-12 inverse of 7
    if (fifths > 6) fifths -= 12;
    return fifths;
}

Bytes meta_event(std::uint8_t type, std::initializer_list<std::uint8_t> data) {
    Bytes out{0xFF, type, std::uint8_t(data.size())};
    out.insert(out.end(), data);
    return out;
}

}  // namespace

Bytes write_midi(const Music& input) {
    ensure_valid(input);
    Music music = sort(input);
    if (music.resolution > 0x7FFF)
        throw Error(errc::unsupported, "resolution " + std::to_string(music.resolution) +
                                           " exceeds the 15-bit SMF division");

    // assign channels: drums on 9, melodic tracks each take a distinct channel
    std::vector<int> channels(music.tracks.size(), 9);
    int next_melodic = 0;
    for (std::size_t i = 0; i < music.tracks.size(); ++i) {
        if (music.tracks[i].is_drum) continue;
        if (next_melodic >= 15)
            throw Error(errc::unsupported,
                        "channel exhaustion: more than 15 non-drum tracks");
        channels[i] = next_melodic < 9 ? next_melodic : next_melodic + 1;
        ++next_melodic;
    }

    Bytes out{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 1};
    std::uint16_t ntrks = std::uint16_t(1 + music.tracks.size());
    out.push_back(std::uint8_t(ntrks >> 8));
    out.push_back(std::uint8_t(ntrks & 0xFF));
    out.push_back(std::uint8_t(music.resolution >> 8));
    out.push_back(std::uint8_t(music.resolution & 0xFF));

    // meta track: title, tempos, time signatures, key signatures
    std::vector<TrackEvent> meta;
    if (music.metadata.title) {
        const std::string& title = *music.metadata.title;
        Bytes payload{0xFF, 0x03};
        write_vlq(std::uint32_t(std::min<std::size_t>(title.size(), 127)), payload);
        for (std::size_t i = 0; i < title.size() && i < 127; ++i)
            payload.push_back(std::uint8_t(title[i]));
        meta.push_back({0, 1, std::move(payload)});
    }
    for (const auto& tempo : music.tempos) {
        auto micros = std::int64_t(60.0e6 / tempo.qpm + 0.5);
        micros = std::clamp<std::int64_t>(micros, 1, 0xFFFFFF);
        meta.push_back({tempo.time, 1,
                        meta_event(0x51, {std::uint8_t(micros >> 16 & 0xFF),
                                          std::uint8_t(micros >> 8 & 0xFF),
                                          std::uint8_t(micros & 0xFF)})});
    }
    for (const auto& ts : music.time_signatures) {
        std::uint8_t dd = 0;
        while ((1 << dd) < ts.denominator) ++dd;
        meta.push_back({ts.time, 2,
                        meta_event(0x58, {std::uint8_t(std::min(ts.numerator, 255)), dd,
                                          24, 8})});
    }
    for (const auto& key : music.key_signatures)
        meta.push_back({key.time, 3,
                        meta_event(0x59, {std::uint8_t(key_to_fifths(key)),
                                          std::uint8_t(key.mode == Mode::minor ? 1 : 0)})});
    flush_track(meta, out);

    for (std::size_t i = 0; i < music.tracks.size(); ++i) {
        const Track& track = music.tracks[i];
        const std::uint8_t channel = std::uint8_t(channels[i]);
        std::vector<TrackEvent> events;
        if (track.name) {
            const std::string& name = *track.name;
            Bytes payload{0xFF, 0x03};
            write_vlq(std::uint32_t(std::min<std::size_t>(name.size(), 127)), payload);
            for (std::size_t j = 0; j < name.size() && j < 127; ++j)
                payload.push_back(std::uint8_t(name[j]));
            events.push_back({0, 1, std::move(payload)});
        }
        events.push_back(
            {0, 1, Bytes{std::uint8_t(0xC0 | channel), std::uint8_t(track.program)}});
        for (const auto& note : track.notes) {
            // SMF cannot carry note-on velocity 0 (that *is* a note-off)
            std::uint8_t velocity = std::uint8_t(std::max(note.velocity, 1));
            events.push_back({note.time, 1,
                              Bytes{std::uint8_t(0x90 | channel), std::uint8_t(note.pitch),
                                    velocity}});
            events.push_back({note.end(), note.duration == 0 ? 2 : 0,
                              Bytes{std::uint8_t(0x80 | channel), std::uint8_t(note.pitch),
                                    0x40}});
        }
        flush_track(events, out);
    }
    return out;
}

Music read_midi_file(const std::filesystem::path& path, Diagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Music music = read_midi(bytes, diag);
    music.metadata.source_filename = path.filename().string();
    return music;
}

void write_midi_file(const Music& music, const std::filesystem::path& path) {
    Bytes bytes = write_midi(music);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error(errc::io, "failed writing " + path.string());
}

}  // namespace musekit
