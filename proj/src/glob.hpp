#pragma once

#include <string_view>

namespace musekit {

/// Shell-style matching over '/'-separated relative paths:
/// `*` and `?` within one segment, `**` across segments, `{a,b}`
/// alternation. Case-sensitive.
bool glob_match(std::string_view pattern, std::string_view path);

}  // namespace musekit
