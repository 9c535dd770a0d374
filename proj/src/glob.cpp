#include "glob.hpp"

#include <string>
#include <vector>

namespace musekit {

namespace {

// expand one level of {a,b,c} into alternatives
std::vector<std::string> expand_braces(std::string_view pattern) {
    auto open = pattern.find('{');
    if (open == std::string_view::npos) return {std::string(pattern)};
    int depth = 0;
    std::size_t close = open;
    for (std::size_t i = open; i < pattern.size(); ++i) {
        if (pattern[i] == '{') ++depth;
        if (pattern[i] == '}' && --depth == 0) {
            close = i;
            break;
        }
    }
    if (close == open) return {std::string(pattern)};  // unbalanced: literal

    std::vector<std::string> alternatives;
    std::size_t start = open + 1;
    int inner = 0;
    for (std::size_t i = open + 1; i <= close; ++i) {
        if (pattern[i] == '{') ++inner;
        if (pattern[i] == '}' && inner > 0) {
            --inner;
            continue;
        }
        if ((pattern[i] == ',' && inner == 0) || i == close) {
            alternatives.emplace_back(pattern.substr(start, i - start));
            start = i + 1;
        }
    }

    std::vector<std::string> out;
    for (const auto& alternative : alternatives) {
        std::string joined = std::string(pattern.substr(0, open)) + alternative +
                             std::string(pattern.substr(close + 1));
        for (auto& expanded : expand_braces(joined)) out.push_back(std::move(expanded));
    }
    return out;
}

bool match_segments(const std::vector<std::string_view>& pattern_segments, std::size_t pi,
                    const std::vector<std::string_view>& path_segments, std::size_t si);

bool match_one(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0;
    std::size_t star_p = std::string_view::npos, star_t = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t] || pattern[p] == '?')) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star_p = p++;
            star_t = t;
        } else if (star_p != std::string_view::npos) {
            p = star_p + 1;
            t = ++star_t;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

bool match_segments(const std::vector<std::string_view>& pattern_segments, std::size_t pi,
                    const std::vector<std::string_view>& path_segments, std::size_t si) {
    if (pi == pattern_segments.size()) return si == path_segments.size();
    if (pattern_segments[pi] == "**") {
        for (std::size_t skip = si; skip <= path_segments.size(); ++skip)
            if (match_segments(pattern_segments, pi + 1, path_segments, skip)) return true;
        return false;
    }
    if (si == path_segments.size()) return false;
    return match_one(pattern_segments[pi], path_segments[si]) &&
           match_segments(pattern_segments, pi + 1, path_segments, si + 1);
}

std::vector<std::string_view> split_path(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '/') {
            if (i > start) out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) {
    for (const auto& expanded : expand_braces(pattern)) {
        auto pattern_segments = split_path(expanded);
        auto path_segments = split_path(path);
        if (match_segments(pattern_segments, 0, path_segments, 0)) return true;
    }
    return false;
}

}  // namespace musekit
