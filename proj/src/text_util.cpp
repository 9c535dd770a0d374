#include "text_util.hpp"

#include <cstdint>

namespace musekit {

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        auto byte = std::uint8_t(text[i]);
        std::size_t extra;
        std::uint32_t min_value;
        if (byte < 0x80) {
            ++i;
            continue;
        } else if ((byte & 0xE0) == 0xC0) {
            extra = 1;
            min_value = 0x80;
        } else if ((byte & 0xF0) == 0xE0) {
            extra = 2;
            min_value = 0x800;
        } else if ((byte & 0xF8) == 0xF0) {
            extra = 3;
            min_value = 0x10000;
        } else {
            return false;
        }
        if (i + extra >= text.size()) return false;
        std::uint32_t value = byte & (0x3F >> extra);
        for (std::size_t k = 1; k <= extra; ++k) {
            auto cont = std::uint8_t(text[i + k]);
            if ((cont & 0xC0) != 0x80) return false;
            value = (value << 6) | (cont & 0x3F);
        }
        if (value < min_value || value > 0x10FFFF) return false;
        if (value >= 0xD800 && value <= 0xDFFF) return false;
        i += extra + 1;
    }
    return true;
}

std::string to_valid_utf8(std::string_view text) {
    if (is_valid_utf8(text)) return std::string(text);
    std::string out;
    out.reserve(text.size() * 2);
    for (char c : text) {
        auto byte = std::uint8_t(c);
        if (byte < 0x80) {
            out.push_back(char(byte));
        } else {
            out.push_back(char(0xC0 | (byte >> 6)));
            out.push_back(char(0x80 | (byte & 0x3F)));
        }
    }
    return out;
}

}  // namespace musekit
