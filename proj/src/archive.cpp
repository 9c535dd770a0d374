#include "archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <span>

#include "musekit/error.hpp"

namespace musekit::archive {

namespace {

std::uint16_t u16le(const Bytes& b, std::size_t at) {
    return std::uint16_t(b[at] | b[at + 1] << 8);
}

std::uint32_t u32le(const Bytes& b, std::size_t at) {
    return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 |
           std::uint32_t(b[at + 2]) << 16 | std::uint32_t(b[at + 3]) << 24;
}

void put16(Bytes& b, std::uint16_t v) {
    b.push_back(std::uint8_t(v & 0xFF));
    b.push_back(std::uint8_t(v >> 8));
}

void put32(Bytes& b, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) b.push_back(std::uint8_t(v >> shift & 0xFF));
}

Bytes inflate_raw(std::span<const std::uint8_t> compressed, std::size_t expected,
                  int window_bits) {
    z_stream stream{};
    if (inflateInit2(&stream, window_bits) != Z_OK)
        throw Error(errc::internal, "inflateInit failed");
    Bytes out;
    out.resize(std::max<std::size_t>(expected, 64));
    stream.next_in = const_cast<Bytef*>(compressed.data());
    stream.avail_in = uInt(compressed.size());
    std::size_t written = 0;
    int rc = Z_OK;
    do {
        if (written == out.size()) out.resize(out.size() * 2);
        stream.next_out = out.data() + written;
        stream.avail_out = uInt(out.size() - written);
        rc = inflate(&stream, Z_NO_FLUSH);
        written = out.size() - stream.avail_out;
        if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) {
            inflateEnd(&stream);
            throw Error(errc::archive, std::string("corrupt compressed data: ") +
                                           (stream.msg ? stream.msg : zError(rc)));
        }
        if (rc == Z_BUF_ERROR && stream.avail_in == 0) break;
    } while (rc != Z_STREAM_END);
    inflateEnd(&stream);
    if (rc != Z_STREAM_END) throw Error(errc::archive, "truncated compressed data");
    out.resize(written);
    return out;
}

bool safe_relative_path(const std::string& name) {
    if (name.empty() || name[0] == '/' || name.find('\\') != std::string::npos) return false;
    std::filesystem::path p(name);
    for (const auto& part : p)
        if (part == "..") return false;
    return true;
}

void write_file(const std::filesystem::path& path, const Bytes& data) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    if (!out) throw Error(errc::io, "failed writing " + path.string());
}

}  // namespace

std::vector<ZipEntry> read_zip(const Bytes& bytes) {
    // locate the end-of-central-directory record
    if (bytes.size() < 22) throw Error(errc::archive, "not a zip archive: too short");
    std::size_t eocd = std::string::npos;
    std::size_t scan_from = bytes.size() >= 22 + 65536 ? bytes.size() - 22 - 65536 : 0;
    for (std::size_t i = bytes.size() - 22 + 1; i-- > scan_from;) {
        if (bytes[i] == 0x50 && bytes[i + 1] == 0x4B && bytes[i + 2] == 0x05 &&
            bytes[i + 3] == 0x06) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos)
        throw Error(errc::archive, "not a zip archive: no end-of-central-directory record");

    std::uint16_t count = u16le(bytes, eocd + 10);
    std::uint32_t directory_offset = u32le(bytes, eocd + 16);
    std::vector<ZipEntry> entries;
    std::size_t at = directory_offset;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (at + 46 > bytes.size() || u32le(bytes, at) != 0x02014B50)
            throw Error(errc::archive, "corrupt zip central directory");
        std::uint16_t method = u16le(bytes, at + 10);
        std::uint32_t crc = u32le(bytes, at + 16);
        std::uint32_t compressed_size = u32le(bytes, at + 20);
        std::uint32_t uncompressed_size = u32le(bytes, at + 24);
        std::uint16_t name_length = u16le(bytes, at + 28);
        std::uint16_t extra_length = u16le(bytes, at + 30);
        std::uint16_t comment_length = u16le(bytes, at + 32);
        std::uint32_t local_offset = u32le(bytes, at + 42);
        if (at + 46 + name_length > bytes.size())
            throw Error(errc::archive, "corrupt zip central directory");
        std::string name(reinterpret_cast<const char*>(&bytes[at + 46]), name_length);
        at += 46 + name_length + extra_length + comment_length;

        if (!name.empty() && name.back() == '/') continue;  // directory entry

        if (local_offset + 30 > bytes.size() || u32le(bytes, local_offset) != 0x04034B50)
            throw Error(errc::archive, "corrupt zip local header for " + name);
        std::uint16_t local_name = u16le(bytes, local_offset + 26);
        std::uint16_t local_extra = u16le(bytes, local_offset + 28);
        std::size_t data_at = local_offset + 30 + local_name + local_extra;
        if (data_at + compressed_size > bytes.size())
            throw Error(errc::archive, "truncated zip data for " + name);

        ZipEntry entry;
        entry.name = std::move(name);
        std::span<const std::uint8_t> raw(&bytes[data_at], compressed_size);
        if (method == 0) {
            entry.data.assign(raw.begin(), raw.end());
        } else if (method == 8) {
            entry.data = inflate_raw(raw, uncompressed_size, -MAX_WBITS);
        } else {
            throw Error(errc::archive, "unsupported zip compression method " +
                                           std::to_string(method) + " for " + entry.name);
        }
        if (entry.data.size() != uncompressed_size)
            throw Error(errc::archive, "zip size mismatch for " + entry.name);
        auto actual = crc32(0, entry.data.data(), uInt(entry.data.size()));
        if (std::uint32_t(actual) != crc)
            throw Error(errc::archive, "zip CRC mismatch for " + entry.name);
        entries.push_back(std::move(entry));
    }
    return entries;
}

const ZipEntry* find_entry(const std::vector<ZipEntry>& entries, std::string_view name) {
    for (const auto& entry : entries)
        if (entry.name == name) return &entry;
    return nullptr;
}

Bytes write_zip_stored(const std::vector<ZipEntry>& entries) {
    Bytes out;
    struct Placed {
        const ZipEntry* entry;
        std::uint32_t offset;
        std::uint32_t crc;
    };
    std::vector<Placed> placed;
    for (const auto& entry : entries) {
        Placed p{&entry, std::uint32_t(out.size()),
                 std::uint32_t(crc32(0, entry.data.data(), uInt(entry.data.size())))};
        put32(out, 0x04034B50);
        put16(out, 20);  // version needed
        put16(out, 0);   // flags
        put16(out, 0);   // method: stored
        put16(out, 0);   // time
        put16(out, 0);   // date
        put32(out, p.crc);
        put32(out, std::uint32_t(entry.data.size()));
        put32(out, std::uint32_t(entry.data.size()));
        put16(out, std::uint16_t(entry.name.size()));
        put16(out, 0);  // extra
        out.insert(out.end(), entry.name.begin(), entry.name.end());
        out.insert(out.end(), entry.data.begin(), entry.data.end());
        placed.push_back(p);
    }
    std::uint32_t directory_offset = std::uint32_t(out.size());
    for (const auto& p : placed) {
        put32(out, 0x02014B50);
        put16(out, 20);
        put16(out, 20);
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put32(out, p.crc);
        put32(out, std::uint32_t(p.entry->data.size()));
        put32(out, std::uint32_t(p.entry->data.size()));
        put16(out, std::uint16_t(p.entry->name.size()));
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put32(out, 0);
        put32(out, p.offset);
        out.insert(out.end(), p.entry->name.begin(), p.entry->name.end());
    }
    std::uint32_t directory_size = std::uint32_t(out.size()) - directory_offset;
    put32(out, 0x06054B50);
    put16(out, 0);
    put16(out, 0);
    put16(out, std::uint16_t(placed.size()));
    put16(out, std::uint16_t(placed.size()));
    put32(out, directory_size);
    put32(out, directory_offset);
    put16(out, 0);
    return out;
}

Bytes gunzip(const Bytes& bytes) {
    // 15 window bits + 32: auto-detect zlib or gzip wrapper
    return inflate_raw(std::span<const std::uint8_t>(bytes.data(), bytes.size()), 0,
                       MAX_WBITS + 32);
}

std::size_t extract_tar(const Bytes& bytes, const std::filesystem::path& dest) {
    std::size_t files = 0;
    std::size_t at = 0;
    std::string long_name;
    while (at + 512 <= bytes.size()) {
        const std::uint8_t* header = &bytes[at];
        bool all_zero = true;
        for (int i = 0; i < 512; ++i)
            if (header[i] != 0) all_zero = false;
        if (all_zero) break;

        char name_field[101] = {};
        std::memcpy(name_field, header, 100);
        char prefix_field[156] = {};
        std::memcpy(prefix_field, header + 345, 155);
        char size_field[13] = {};
        std::memcpy(size_field, header + 124, 12);
        std::size_t size = std::strtoull(size_field, nullptr, 8);
        char type = char(header[156]);
        at += 512;

        std::size_t data_blocks = (size + 511) / 512;
        if (at + data_blocks * 512 > bytes.size() && size > 0)
            throw Error(errc::archive, "truncated tar archive");

        std::string name = long_name.empty()
                               ? (prefix_field[0]
                                      ? std::string(prefix_field) + "/" + name_field
                                      : std::string(name_field))
                               : long_name;
        long_name.clear();

        if (type == 'L') {  // GNU long name: payload holds the next entry's name
            long_name.assign(reinterpret_cast<const char*>(&bytes[at]), size);
            while (!long_name.empty() && long_name.back() == '\0') long_name.pop_back();
        } else if ((type == '0' || type == '\0') && size >= 0) {
            if (safe_relative_path(name)) {
                Bytes data(bytes.begin() + std::ptrdiff_t(at),
                           bytes.begin() + std::ptrdiff_t(at + size));
                write_file(dest / name, data);
                ++files;
            }
        }
        // directories, pax headers and links are skipped
        at += data_blocks * 512;
    }
    return files;
}

std::size_t extract_tar_gz(const Bytes& bytes, const std::filesystem::path& dest) {
    return extract_tar(gunzip(bytes), dest);
}

std::size_t extract_zip(const Bytes& bytes, const std::filesystem::path& dest) {
    std::size_t files = 0;
    for (const auto& entry : read_zip(bytes)) {
        if (!safe_relative_path(entry.name)) continue;
        write_file(dest / entry.name, entry.data);
        ++files;
    }
    return files;
}

}  // namespace musekit::archive
