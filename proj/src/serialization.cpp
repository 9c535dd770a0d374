#include "musekit/serialization.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace musekit {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json metadata_to_json(const Metadata& metadata) {
    ordered_json j = ordered_json::object();
    if (metadata.title) j["title"] = *metadata.title;
    j["creators"] = metadata.creators;
    if (metadata.copyright) j["copyright"] = *metadata.copyright;
    if (metadata.collection) j["collection"] = *metadata.collection;
    if (metadata.source_filename) j["source_filename"] = *metadata.source_filename;
    if (metadata.source_format) j["source_format"] = *metadata.source_format;
    return j;
}

ordered_json music_to_json(const Music& music) {
    ordered_json j = ordered_json::object();
    j["schema_version"] = music.metadata.schema_version;
    j["metadata"] = metadata_to_json(music.metadata);
    j["resolution"] = music.resolution;
    j["tempos"] = ordered_json::array();
    for (const auto& t : music.tempos)
        j["tempos"].push_back({{"time", t.time}, {"qpm", t.qpm}});
    j["key_signatures"] = ordered_json::array();
    for (const auto& k : music.key_signatures)
        j["key_signatures"].push_back(
            {{"time", k.time}, {"root", k.root}, {"mode", mode_name(k.mode)}});
    j["time_signatures"] = ordered_json::array();
    for (const auto& s : music.time_signatures)
        j["time_signatures"].push_back(
            {{"time", s.time}, {"numerator", s.numerator}, {"denominator", s.denominator}});
    j["tracks"] = ordered_json::array();
    for (const auto& track : music.tracks) {
        ordered_json tj = ordered_json::object();
        tj["program"] = track.program;
        tj["is_drum"] = track.is_drum;
        if (track.name) tj["name"] = *track.name;
        tj["notes"] = ordered_json::array();
        for (const auto& n : track.notes)
            tj["notes"].push_back({{"time", n.time},
                                   {"pitch", n.pitch},
                                   {"duration", n.duration},
                                   {"velocity", n.velocity}});
        tj["chords"] = ordered_json::array();
        for (const auto& c : track.chords)
            tj["chords"].push_back({{"time", c.time},
                                    {"pitches", c.pitches},
                                    {"duration", c.duration},
                                    {"velocity", c.velocity}});
        tj["lyrics"] = ordered_json::array();
        for (const auto& l : track.lyrics)
            tj["lyrics"].push_back({{"time", l.time}, {"text", l.text}});
        j["tracks"].push_back(std::move(tj));
    }
    return j;
}

// --- strict reader -------------------------------------------------------

class DocumentReader {
public:
    Music read(const ordered_json& doc) {
        require_object(doc, "$");
        check_keys(doc, "$",
                   {"schema_version", "metadata", "resolution", "tempos", "key_signatures",
                    "time_signatures", "tracks"});
        std::string version = get_string(doc, "$", "schema_version");
        if (version != kSchemaVersion)
            throw Error(errc::version, "unsupported schema_version \"" + version +
                                           "\" (expected \"" + kSchemaVersion + "\")");
        Music music;
        music.metadata = read_metadata(require(doc, "$", "metadata"), "$.metadata");
        music.metadata.schema_version = version;
        music.resolution = get_int(doc, "$", "resolution");
        for (const auto& e : enumerate(require(doc, "$", "tempos"), "$.tempos"))
            music.tempos.push_back(read_tempo(e));
        for (const auto& e : enumerate(require(doc, "$", "key_signatures"), "$.key_signatures"))
            music.key_signatures.push_back(read_key(e));
        for (const auto& e :
             enumerate(require(doc, "$", "time_signatures"), "$.time_signatures"))
            music.time_signatures.push_back(read_time_signature(e));
        for (const auto& e : enumerate(require(doc, "$", "tracks"), "$.tracks"))
            music.tracks.push_back(read_track(e));
        return music;
    }

private:
    struct Indexed {
        std::string path;
        const ordered_json& value;
    };

    std::vector<Indexed> enumerate(const ordered_json& j, const std::string& path) {
        if (!j.is_array()) throw Error(errc::schema, path + " must be an array");
        std::vector<Indexed> out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back({path + "[" + std::to_string(i) + "]", j[i]});
        return out;
    }

    Metadata read_metadata(const ordered_json& j, const std::string& path) {
        require_object(j, path);
        check_keys(j, path,
                   {"title", "creators", "copyright", "collection", "source_filename",
                    "source_format"});
        Metadata m;
        m.title = get_optional_string(j, path, "title");
        if (j.contains("creators"))
            for (const auto& e : enumerate(j["creators"], path + ".creators"))
                m.creators.push_back(as_string(e.value, e.path));
        m.copyright = get_optional_string(j, path, "copyright");
        m.collection = get_optional_string(j, path, "collection");
        m.source_filename = get_optional_string(j, path, "source_filename");
        m.source_format = get_optional_string(j, path, "source_format");
        return m;
    }

    Tempo read_tempo(const Indexed& e) {
        require_object(e.value, e.path);
        check_keys(e.value, e.path, {"time", "qpm"});
        Tempo t;
        t.time = get_tick(e.value, e.path, "time");
        t.qpm = get_number(e.value, e.path, "qpm");
        return t;
    }

    KeySignature read_key(const Indexed& e) {
        require_object(e.value, e.path);
        check_keys(e.value, e.path, {"time", "root", "mode"});
        KeySignature k;
        k.time = get_tick(e.value, e.path, "time");
        k.root = get_int(e.value, e.path, "root");
        std::string mode = get_string(e.value, e.path, "mode");
        if (mode == "major")
            k.mode = Mode::major;
        else if (mode == "minor")
            k.mode = Mode::minor;
        else
            throw Error(errc::schema, e.path + ".mode must be \"major\" or \"minor\", got \"" +
                                          mode + "\"");
        return k;
    }

    TimeSignature read_time_signature(const Indexed& e) {
        require_object(e.value, e.path);
        check_keys(e.value, e.path, {"time", "numerator", "denominator"});
        TimeSignature s;
        s.time = get_tick(e.value, e.path, "time");
        s.numerator = get_int(e.value, e.path, "numerator");
        s.denominator = get_int(e.value, e.path, "denominator");
        return s;
    }

    Track read_track(const Indexed& e) {
        require_object(e.value, e.path);
        check_keys(e.value, e.path, {"program", "is_drum", "name", "notes", "chords", "lyrics"});
        Track t;
        t.program = get_int(e.value, e.path, "program");
        t.is_drum = get_bool(e.value, e.path, "is_drum");
        t.name = get_optional_string(e.value, e.path, "name");
        if (e.value.contains("notes"))
            for (const auto& ne : enumerate(e.value["notes"], e.path + ".notes")) {
                require_object(ne.value, ne.path);
                check_keys(ne.value, ne.path, {"time", "pitch", "duration", "velocity"});
                Note n;
                n.time = get_tick(ne.value, ne.path, "time");
                n.pitch = get_int(ne.value, ne.path, "pitch");
                n.duration = get_tick(ne.value, ne.path, "duration");
                n.velocity = get_int(ne.value, ne.path, "velocity");
                t.notes.push_back(n);
            }
        if (e.value.contains("chords"))
            for (const auto& ce : enumerate(e.value["chords"], e.path + ".chords")) {
                require_object(ce.value, ce.path);
                check_keys(ce.value, ce.path, {"time", "pitches", "duration", "velocity"});
                Chord c;
                c.time = get_tick(ce.value, ce.path, "time");
                for (const auto& pe : enumerate(require(ce.value, ce.path, "pitches"),
                                                ce.path + ".pitches"))
                    c.pitches.push_back(as_int(pe.value, pe.path));
                c.duration = get_tick(ce.value, ce.path, "duration");
                c.velocity = get_int(ce.value, ce.path, "velocity");
                t.chords.push_back(c);
            }
        if (e.value.contains("lyrics"))
            for (const auto& le : enumerate(e.value["lyrics"], e.path + ".lyrics")) {
                require_object(le.value, le.path);
                check_keys(le.value, le.path, {"time", "text"});
                Lyric l;
                l.time = get_tick(le.value, le.path, "time");
                l.text = get_string(le.value, le.path, "text");
                t.lyrics.push_back(l);
            }
        return t;
    }

    void require_object(const ordered_json& j, const std::string& path) {
        if (!j.is_object()) throw Error(errc::schema, path + " must be an object");
    }

    void check_keys(const ordered_json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
        for (const auto& [key, value] : j.items()) {
            bool known = false;
            for (const char* a : allowed)
                if (key == a) known = true;
            if (!known)
                throw Error(errc::schema, "unknown key \"" + key + "\" at " + path);
        }
    }

    const ordered_json& require(const ordered_json& j, const std::string& path,
                                const char* key) {
        if (!j.contains(key))
            throw Error(errc::schema, std::string("missing key \"") + key + "\" at " + path);
        return j[key];
    }

    std::string as_string(const ordered_json& j, const std::string& path) {
        if (!j.is_string()) throw Error(errc::schema, path + " must be a string");
        return j.get<std::string>();
    }

    int as_int(const ordered_json& j, const std::string& path) {
        if (!j.is_number_integer())
            throw Error(errc::schema, path + " must be an integer");
        return j.get<int>();
    }

    std::string get_string(const ordered_json& j, const std::string& path, const char* key) {
        return as_string(require(j, path, key), path + "." + key);
    }

    std::optional<std::string> get_optional_string(const ordered_json& j,
                                                   const std::string& path, const char* key) {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return as_string(j[key], path + "." + key);
    }

    int get_int(const ordered_json& j, const std::string& path, const char* key) {
        return as_int(require(j, path, key), path + "." + key);
    }

    Tick get_tick(const ordered_json& j, const std::string& path, const char* key) {
        const auto& v = require(j, path, key);
        if (!v.is_number_integer())
            throw Error(errc::schema, path + "." + key + " must be an integer");
        return v.get<Tick>();
    }

    double get_number(const ordered_json& j, const std::string& path, const char* key) {
        const auto& v = require(j, path, key);
        if (!v.is_number()) throw Error(errc::schema, path + "." + key + " must be a number");
        return v.get<double>();
    }

    bool get_bool(const ordered_json& j, const std::string& path, const char* key) {
        const auto& v = require(j, path, key);
        if (!v.is_boolean()) throw Error(errc::schema, path + "." + key + " must be a boolean");
        return v.get<bool>();
    }
};

// line/column of a byte offset, both 1-based.
std::pair<std::size_t, std::size_t> locate(std::string_view text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

}  // namespace

std::string save(const Music& music) {
    ensure_valid(music);
    return music_to_json(sort(music)).dump(2) + "\n";
}

Music load(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, column] = locate(text, e.byte > 0 ? e.byte - 1 : 0);
        throw Error(errc::parse, "malformed document at line " + std::to_string(line) +
                                     ", column " + std::to_string(column) + ": " + e.what());
    }
    Music music = DocumentReader().read(doc);
    ensure_valid(music);
    return music;
}

void save_file(const Music& music, const std::filesystem::path& path) {
    std::string text = save(music);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) throw Error(errc::io, "failed writing " + path.string());
}

Music load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load(buffer.str());
}

}  // namespace musekit
