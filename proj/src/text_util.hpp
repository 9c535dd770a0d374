#pragma once

#include <string>
#include <string_view>

namespace musekit {

bool is_valid_utf8(std::string_view text);

/// Returns `text` unchanged when it is valid UTF-8, otherwise re-reads it
/// as ISO-8859-1 and transcodes. Keeps every canonical document valid UTF-8
/// no matter what encoding a source file used.
std::string to_valid_utf8(std::string_view text);

}  // namespace musekit
