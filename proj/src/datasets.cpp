#include "musekit/datasets.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <random>
#include <sstream>

#include "archive.hpp"
#include "glob.hpp"
#include "musekit/abc_io.hpp"
#include "musekit/midi_io.hpp"
#include "musekit/musicxml_io.hpp"
#include "musekit/serialization.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace musekit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kMarkerName = ".converted.json";
constexpr const char* kExtractedName = ".extracted.json";

const char* archive_name(ArchiveKind kind) {
    switch (kind) {
        case ArchiveKind::none: return "none";
        case ArchiveKind::zip: return "zip";
        case ArchiveKind::tar_gz: return "tar.gz";
    }
    return "none";
}

ArchiveKind archive_from(std::string_view text) {
    if (text == "none") return ArchiveKind::none;
    if (text == "zip") return ArchiveKind::zip;
    if (text == "tar.gz") return ArchiveKind::tar_gz;
    throw Error(errc::schema, "unknown archive kind \"" + std::string(text) + "\"");
}

std::string sha256_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error(errc::internal, "sha256 init failed");
    }
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof buffer);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer, std::size_t(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::size_t curl_sink(char* data, std::size_t size, std::size_t count, void* stream) {
    auto* out = static_cast<std::ofstream*>(stream);
    out->write(data, std::streamsize(size * count));
    return out->good() ? size * count : 0;
}

void fetch_url(const std::string& url, const std::filesystem::path& dest,
               std::uint64_t& bytes) {
    static std::once_flag curl_once;
    std::call_once(curl_once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });

    std::filesystem::create_directories(dest.parent_path());
    std::filesystem::path partial = dest;
    partial += ".part";
    std::ofstream out(partial, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + partial.string() + " for writing");

    CURL* curl = curl_easy_init();
    if (!curl) throw Error(errc::internal, "curl init failed");
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, curl_sink);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &out);
    curl_easy_setopt(curl, CURLOPT_USERAGENT, "musekit/1.0");
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);
    CURLcode rc = curl_easy_perform(curl);
    curl_off_t downloaded = 0;
    curl_easy_getinfo(curl, CURLINFO_SIZE_DOWNLOAD_T, &downloaded);
    curl_easy_cleanup(curl);
    out.close();

    if (rc != CURLE_OK) {
        std::filesystem::remove(partial);
        throw Error(errc::transfer,
                    "fetching " + url + " failed: " + curl_easy_strerror(rc));
    }
    bytes += std::uint64_t(downloaded);
    std::filesystem::rename(partial, dest);
}

Music read_source_file(const std::string& format, const std::filesystem::path& path) {
    if (format == "midi") return read_midi_file(path);
    if (format == "musicxml") return read_musicxml_file(path);
    if (format == "mxl") return read_mxl_file(path);
    if (format == "muspy") return load_file(path);
    if (format == "abc") {
        auto tunes = read_abc_file(path);
        if (tunes.empty())
            throw Error(errc::schema, "no tunes in " + path.string());
        // one Music per file; multi-tune files contribute their first tune
        return tunes.front();
    }
    throw Error(errc::config, "unknown source_format \"" + format + "\"");
}

// corpus identity: sorted '/'-separated paths relative to raw/
std::vector<std::string> matched_raw_files(const CorpusHandle& handle) {
    std::filesystem::path raw = handle.root / "raw";
    if (!std::filesystem::is_directory(raw))
        throw Error(errc::config, "corpus has no raw/ directory under " +
                                      handle.root.string() + " (not downloaded?)");
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(raw)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = entry.path().lexically_relative(raw).generic_string();
        if (glob_match(handle.manifest.file_glob, rel)) out.push_back(std::move(rel));
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct MarkerEntry {
    std::string sha256;
    std::string converted;
    std::string status;
    std::string error;
};

std::map<std::string, MarkerEntry> load_marker(const std::filesystem::path& root) {
    std::ifstream in(root / kMarkerName, std::ios::binary);
    if (!in) return {};
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const std::exception&) {
        return {};
    }
    std::map<std::string, MarkerEntry> out;
    if (!doc.contains("files") || !doc["files"].is_object()) return out;
    for (const auto& [path, entry] : doc["files"].items()) {
        MarkerEntry m;
        m.sha256 = entry.value("sha256", "");
        m.converted = entry.value("converted", "");
        m.status = entry.value("status", "");
        m.error = entry.value("error", "");
        out[path] = std::move(m);
    }
    return out;
}

void save_marker(const std::filesystem::path& root, const std::string& manifest_name,
                 const std::map<std::string, MarkerEntry>& entries) {
    ordered_json files = ordered_json::object();
    for (const auto& [path, entry] : entries) {
        ordered_json e = ordered_json::object();
        e["sha256"] = entry.sha256;
        e["converted"] = entry.converted;
        e["status"] = entry.status;
        if (!entry.error.empty()) e["error"] = entry.error;
        files[path] = std::move(e);
    }
    ordered_json doc = ordered_json::object();
    doc["manifest"] = manifest_name;
    doc["files"] = std::move(files);
    std::ofstream out(root / kMarkerName, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot write conversion marker under " + root.string());
    out << doc.dump(2) << "\n";
}

}  // namespace

// --- manifest --------------------------------------------------------------

std::string ManifestSource::local_name() const {
    if (filename) return *filename;
    std::string name = url;
    auto query = name.find_first_of("?#");
    if (query != std::string::npos) name.resize(query);
    auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    if (name.empty()) throw Error(errc::schema, "cannot derive a filename from " + url);
    return name;
}

DatasetManifest DatasetManifest::from_json(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(errc::parse, std::string("malformed manifest: ") + e.what());
    }
    if (!doc.is_object()) throw Error(errc::schema, "manifest must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        static const char* known[] = {"name",         "sources",    "file_glob",
                                      "source_format", "license_note", "preprocess",
                                      "annotations",  "unverified"};
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw Error(errc::schema, "unknown manifest key \"" + key + "\"");
    }
    DatasetManifest manifest;
    manifest.name = doc.value("name", "");
    manifest.file_glob = doc.value("file_glob", "");
    manifest.source_format = doc.value("source_format", "");
    manifest.license_note = doc.value("license_note", "");
    manifest.unverified = doc.value("unverified", false);
    if (manifest.name.empty()) throw Error(errc::schema, "manifest needs a name");
    if (manifest.file_glob.empty()) throw Error(errc::schema, "manifest needs a file_glob");
    static const char* formats[] = {"midi", "musicxml", "mxl", "abc", "muspy"};
    bool format_ok = false;
    for (const char* f : formats)
        if (manifest.source_format == f) format_ok = true;
    if (!format_ok)
        throw Error(errc::schema,
                    "unknown source_format \"" + manifest.source_format + "\"");
    if (doc.contains("preprocess")) {
        manifest.preprocess.discard_repeats = doc["preprocess"].value("discard_repeats", false);
        manifest.preprocess.melody_only = doc["preprocess"].value("melody_only", false);
    }
    if (doc.contains("annotations"))
        for (const auto& [key, value] : doc["annotations"].items())
            manifest.annotations[key] = value.get<std::string>();
    if (!doc.contains("sources") || !doc["sources"].is_array() || doc["sources"].empty())
        throw Error(errc::schema, "manifest needs at least one source");
    for (const auto& source : doc["sources"]) {
        ManifestSource s;
        s.url = source.value("url", "");
        if (s.url.empty()) throw Error(errc::schema, "source needs a url");
        if (source.contains("sha256") && !source["sha256"].is_null())
            s.sha256 = source["sha256"].get<std::string>();
        s.archive = archive_from(source.value("archive", "none"));
        if (source.contains("filename")) s.filename = source["filename"].get<std::string>();
        manifest.sources.push_back(std::move(s));
    }
    return manifest;
}

DatasetManifest DatasetManifest::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open manifest " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

std::string DatasetManifest::to_json() const {
    ordered_json doc = ordered_json::object();
    doc["name"] = name;
    doc["source_format"] = source_format;
    doc["file_glob"] = file_glob;
    doc["license_note"] = license_note;
    if (unverified) doc["unverified"] = true;
    if (preprocess.discard_repeats || preprocess.melody_only) {
        ordered_json p = ordered_json::object();
        p["discard_repeats"] = preprocess.discard_repeats;
        p["melody_only"] = preprocess.melody_only;
        doc["preprocess"] = std::move(p);
    }
    if (!annotations.empty()) {
        ordered_json a = ordered_json::object();
        for (const auto& [key, value] : annotations) a[key] = value;
        doc["annotations"] = std::move(a);
    }
    doc["sources"] = ordered_json::array();
    for (const auto& source : sources) {
        ordered_json s = ordered_json::object();
        s["url"] = source.url;
        if (source.sha256) s["sha256"] = *source.sha256;
        else s["sha256"] = nullptr;
        s["archive"] = archive_name(source.archive);
        if (source.filename) s["filename"] = *source.filename;
        doc["sources"].push_back(std::move(s));
    }
    return doc.dump(2) + "\n";
}

// --- download ---------------------------------------------------------------

std::string DownloadReport::to_json() const {
    ordered_json doc = ordered_json::object();
    doc["fetched"] = fetched;
    doc["verified_skips"] = verified_skips;
    doc["unverified"] = unverified;
    doc["bytes_transferred"] = bytes_transferred;
    doc["files_extracted"] = files_extracted;
    return doc.dump(2) + "\n";
}

DownloadReport download(const DatasetManifest& manifest,
                        const std::filesystem::path& root) {
    DownloadReport report;
    std::filesystem::create_directories(root / "raw");

    // archives already extracted, keyed by checksum
    ordered_json extracted = ordered_json::object();
    {
        std::ifstream in(root / kExtractedName, std::ios::binary);
        if (in) {
            try {
                extracted = ordered_json::parse(in);
            } catch (const std::exception&) {
                extracted = ordered_json::object();
            }
        }
    }

    for (const auto& source : manifest.sources) {
        std::string name = source.local_name();
        std::filesystem::path target =
            source.archive == ArchiveKind::none ? root / "raw" / name : root / name;

        bool have = std::filesystem::is_regular_file(target);
        std::string digest = have ? sha256_hex(target) : "";
        if (have && source.sha256 && digest == *source.sha256) {
            report.verified_skips.push_back(name);
        } else if (have && !source.sha256) {
            report.unverified.push_back(name);
        } else {
            fetch_url(source.url, target, report.bytes_transferred);
            digest = sha256_hex(target);
            if (source.sha256 && digest != *source.sha256)
                throw Error(errc::integrity,
                            "checksum mismatch for " + name + ": expected " +
                                *source.sha256 + ", got " + digest);
            if (!source.sha256) report.unverified.push_back(name);
            report.fetched.push_back(name);
        }

        if (source.archive != ArchiveKind::none) {
            if (extracted.contains(name) && extracted[name] == digest) continue;
            std::ifstream in(target, std::ios::binary);
            archive::Bytes bytes((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
            report.files_extracted +=
                source.archive == ArchiveKind::zip
                    ? archive::extract_zip(bytes, root / "raw")
                    : archive::extract_tar_gz(bytes, root / "raw");
            extracted[name] = digest;
        }
    }

    std::ofstream out(root / kExtractedName, std::ios::binary);
    out << extracted.dump(2) << "\n";
    return report;
}

// --- convert ----------------------------------------------------------------

std::string ConvertReport::to_json() const {
    ordered_json doc = ordered_json::object();
    doc["matched"] = matched;
    doc["converted"] = converted;
    doc["skipped_unparseable"] = skipped_unparseable;
    doc["skipped_unchanged"] = skipped_unchanged;
    return doc.dump(2) + "\n";
}

ConvertReport convert(const CorpusHandle& handle, unsigned workers) {
    auto files = matched_raw_files(handle);
    if (files.empty())
        throw Error(errc::config, "empty corpus: \"" + handle.manifest.file_glob +
                                      "\" matched no files under " +
                                      (handle.root / "raw").string());

    auto previous = load_marker(handle.root);
    std::map<std::string, MarkerEntry> marker;
    ConvertReport report;
    report.matched = files.size();

    std::vector<MarkerEntry> results(files.size());
    std::vector<int> outcome(files.size(), 0);  // 0 converted, 1 unchanged, 2 failed
    parallel_for(files.size(), workers, [&](std::size_t i) {
        const std::string& rel = files[i];
        std::filesystem::path source = handle.root / "raw" / rel;
        MarkerEntry entry;
        entry.sha256 = sha256_hex(source);
        entry.converted = rel + kCanonicalExtension;
        auto old = previous.find(rel);
        if (old != previous.end() && old->second.sha256 == entry.sha256 &&
            old->second.status == "ok" &&
            std::filesystem::is_regular_file(handle.root / "converted" /
                                             old->second.converted)) {
            results[i] = old->second;
            outcome[i] = 1;
            return;
        }
        try {
            Music music = read_source_file(handle.manifest.source_format, source);
            music.metadata.collection = handle.manifest.name;
            std::filesystem::path dest = handle.root / "converted" / entry.converted;
            std::filesystem::create_directories(dest.parent_path());
            save_file(music, dest);
            entry.status = "ok";
        } catch (const Error& e) {
            entry.status = "skipped";
            entry.error = e.what();
        }
        results[i] = std::move(entry);
        outcome[i] = results[i].status == "ok" ? 0 : 2;
    });

    for (std::size_t i = 0; i < files.size(); ++i) {
        marker[files[i]] = results[i];
        if (outcome[i] == 0) ++report.converted;
        else if (outcome[i] == 1) ++report.skipped_unchanged;
        else ++report.skipped_unparseable;
    }
    save_marker(handle.root, handle.manifest.name, marker);

    if (report.converted + report.skipped_unchanged == 0)
        throw Error(errc::config, "empty corpus: no file under " +
                                      (handle.root / "raw").string() +
                                      " parsed as " + handle.manifest.source_format);
    return report;
}

// --- iterate ----------------------------------------------------------------

CorpusIterator::CorpusIterator(const CorpusHandle& handle) : handle_(handle) {
    if (handle.mode == CorpusMode::on_the_fly) {
        keys_ = matched_raw_files(handle);
        return;
    }
    if (!std::filesystem::is_regular_file(handle.root / kMarkerName))
        throw Error(errc::config,
                    "preconverted mode needs a completed conversion marker under " +
                        handle.root.string());
    for (auto& [path, entry] : load_marker(handle.root)) {
        keys_.push_back(path);
        marker_[path] = {entry.status, entry.error.empty() ? entry.status : entry.error};
    }
    std::sort(keys_.begin(), keys_.end());
}

CorpusItem CorpusIterator::load(std::size_t index) const {
    const std::string& rel = keys_.at(index);
    CorpusItem item;
    item.path = rel;
    try {
        if (handle_.mode == CorpusMode::on_the_fly) {
            Music music =
                read_source_file(handle_.manifest.source_format, handle_.root / "raw" / rel);
            music.metadata.collection = handle_.manifest.name;
            item.music = std::move(music);
        } else {
            auto entry = marker_.at(rel);
            if (entry.first != "ok") {
                item.error = entry.second;
                return item;
            }
            item.music = load_file(handle_.root / "converted" / (rel + kCanonicalExtension));
        }
    } catch (const Error& e) {
        item.error = e.what();
    }
    return item;
}

std::optional<CorpusItem> CorpusIterator::next() {
    if (cursor_ >= keys_.size()) return std::nullopt;
    return load(cursor_++);
}

std::vector<CorpusItem> iterate_all(const CorpusHandle& handle) {
    CorpusIterator it(handle);
    std::vector<CorpusItem> out;
    while (auto item = it.next()) out.push_back(std::move(*item));
    return out;
}

// --- split ------------------------------------------------------------------

const char* DatasetSplit::part_name(std::size_t index) {
    static const char* names[] = {"train", "valid", "test"};
    return names[index];
}

std::string DatasetSplit::to_json() const {
    ordered_json doc = ordered_json::object();
    doc["seed"] = seed;
    doc["ratios"] = ratios;
    ordered_json p = ordered_json::object();
    for (std::size_t i = 0; i < 3; ++i) p[part_name(i)] = parts[i];
    doc["parts"] = std::move(p);
    return doc.dump(2) + "\n";
}

DatasetSplit DatasetSplit::from_json(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(errc::parse, std::string("malformed split: ") + e.what());
    }
    DatasetSplit out;
    out.seed = doc.value("seed", std::uint64_t(0));
    if (doc.contains("ratios"))
        for (std::size_t i = 0; i < 3; ++i) out.ratios[i] = doc["ratios"].at(i).get<double>();
    for (std::size_t i = 0; i < 3; ++i)
        if (doc.contains("parts") && doc["parts"].contains(part_name(i)))
            for (const auto& path : doc["parts"][part_name(i)])
                out.parts[i].push_back(path.get<std::string>());
    return out;
}

DatasetSplit split(const CorpusHandle& handle, std::array<double, 3> ratios,
                   std::uint64_t seed) {
    for (double r : ratios)
        if (!(r > 0))
            throw Error(errc::invalid_argument, "split ratios must be positive");
    std::vector<std::string> files = CorpusIterator(handle).keys();
    if (files.size() < 3)
        throw Error(errc::invalid_argument,
                    "cannot split " + std::to_string(files.size()) + " files into 3 parts");

    std::mt19937_64 rng(seed);
    shuffle(files, rng);

    const double total = ratios[0] + ratios[1] + ratios[2];
    const std::size_t n = files.size();
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        double quota = double(n) * ratios[i] / total;
        sizes[i] = std::size_t(quota);
        remainders[i] = quota - double(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {  // largest remainder, ties to the earliest part
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i)
            if (remainders[i] > remainders[best]) best = i;
        ++sizes[best];
        remainders[best] = -1;
        ++assigned;
    }

    DatasetSplit out;
    out.seed = seed;
    out.ratios = ratios;
    std::size_t at = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        out.parts[i].assign(files.begin() + std::ptrdiff_t(at),
                            files.begin() + std::ptrdiff_t(at + sizes[i]));
        at += sizes[i];
    }
    return out;
}

// --- stratified sampling ------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> stratified_draws(
    const std::vector<CorpusHandle>& handles, std::uint64_t seed, std::size_t count) {
    if (handles.empty())
        throw Error(errc::config, "stratified sampling needs at least one corpus");
    std::vector<std::size_t> sizes;
    for (const auto& handle : handles) {
        CorpusIterator it(handle);
        if (it.size() == 0)
            throw Error(errc::config,
                        "corpus \"" + handle.manifest.name + "\" is empty");
        sizes.push_back(it.size());
    }
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> draws;
    draws.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t corpus = std::size_t(bounded(rng, sizes.size()));
        draws.emplace_back(corpus, std::size_t(bounded(rng, sizes[corpus])));
    }
    return draws;
}

StratifiedSampler::StratifiedSampler(std::vector<CorpusHandle> handles, std::uint64_t seed,
                                     std::size_t count) {
    draws_ = stratified_draws(handles, seed, count);
    for (const auto& handle : handles) views_.emplace_back(handle);
}

std::optional<CorpusItem> StratifiedSampler::next() {
    if (cursor_ >= draws_.size()) return std::nullopt;
    auto [corpus, file] = draws_[cursor_++];
    return views_[corpus].load(file);
}

}  // namespace musekit
