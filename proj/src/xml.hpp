#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace musekit::xml {

/// Element tree with attributes, ordered children and concatenated direct
/// text. Mixed content beyond that is not preserved (MusicXML never needs
/// it). Entities, CDATA, comments, DOCTYPE and processing instructions are
/// handled by the parser.
struct Node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Node> children;
    std::string text;

    const Node* child(std::string_view child_name) const;
    std::vector<const Node*> all(std::string_view child_name) const;
    std::optional<std::string_view> attribute(std::string_view attr_name) const;
    std::string_view child_text(std::string_view child_name) const;  // "" when absent
};

/// Parses one document and returns its root element. Throws
/// Error(errc::parse) with line/column on malformed input.
Node parse(std::string_view text);

/// Minimal writer for the subset above (attributes escaped, text escaped,
/// 2-space indentation).
std::string write(const Node& root);

}  // namespace musekit::xml
