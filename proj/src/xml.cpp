#include "xml.hpp"

#include <sstream>

#include "musekit/error.hpp"

namespace musekit::xml {

const Node* Node::child(std::string_view child_name) const {
    for (const auto& c : children)
        if (c.name == child_name) return &c;
    return nullptr;
}

std::vector<const Node*> Node::all(std::string_view child_name) const {
    std::vector<const Node*> out;
    for (const auto& c : children)
        if (c.name == child_name) out.push_back(&c);
    return out;
}

std::optional<std::string_view> Node::attribute(std::string_view attr_name) const {
    for (const auto& [name, value] : attributes)
        if (name == attr_name) return std::string_view(value);
    return std::nullopt;
}

std::string_view Node::child_text(std::string_view child_name) const {
    const Node* c = child(child_name);
    return c ? std::string_view(c->text) : std::string_view();
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Node run() {
        // UTF-8 byte-order mark
        if (text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
        skip_prolog();
        Node root = parse_element();
        skip_whitespace_and_misc();
        if (pos_ < text_.size()) fail("content after the document element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& message) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw Error(errc::parse, "malformed XML at line " + std::to_string(line) +
                                     ", column " + std::to_string(column) + ": " + message);
    }

    bool starts_with(std::string_view prefix) const {
        return text_.substr(pos_, prefix.size()) == prefix;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    char take() {
        if (pos_ >= text_.size()) fail("unexpected end of input");
        return text_[pos_++];
    }

    void expect(char c) {
        if (take() != c) {
            --pos_;
            fail(std::string("expected '") + c + "'");
        }
    }

    void skip_whitespace() {
        while (pos_ < text_.size() && std::isspace(std::uint8_t(text_[pos_]))) ++pos_;
    }

    void skip_until(std::string_view terminator, const char* what) {
        auto at = text_.find(terminator, pos_);
        if (at == std::string_view::npos) fail(std::string("unterminated ") + what);
        pos_ = at + terminator.size();
    }

    void skip_doctype() {
        pos_ += 9;  // "<!DOCTYPE"
        int brackets = 0;
        while (pos_ < text_.size()) {
            char c = take();
            if (c == '[') ++brackets;
            else if (c == ']') --brackets;
            else if (c == '>' && brackets == 0) return;
        }
        fail("unterminated DOCTYPE");
    }

    // comments, processing instructions and the XML declaration
    bool skip_misc() {
        if (starts_with("<!--")) {
            pos_ += 4;
            skip_until("-->", "comment");
            return true;
        }
        if (starts_with("<?")) {
            pos_ += 2;
            skip_until("?>", "processing instruction");
            return true;
        }
        if (starts_with("<!DOCTYPE")) {
            skip_doctype();
            return true;
        }
        return false;
    }

    void skip_prolog() {
        skip_whitespace();
        while (skip_misc()) skip_whitespace();
    }

    void skip_whitespace_and_misc() {
        skip_whitespace();
        while (skip_misc()) skip_whitespace();
    }

    static bool name_char(char c) {
        return std::isalnum(std::uint8_t(c)) || c == '-' || c == '_' || c == ':' || c == '.';
    }

    std::string parse_name() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && name_char(text_[pos_])) ++pos_;
        if (pos_ == start) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string decode_entities(std::string_view raw) {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size();) {
            if (raw[i] != '&') {
                out.push_back(raw[i++]);
                continue;
            }
            auto end = raw.find(';', i);
            if (end == std::string_view::npos) fail("unterminated entity reference");
            std::string_view entity = raw.substr(i + 1, end - i - 1);
            if (entity == "lt") out.push_back('<');
            else if (entity == "gt") out.push_back('>');
            else if (entity == "amp") out.push_back('&');
            else if (entity == "quot") out.push_back('"');
            else if (entity == "apos") out.push_back('\'');
            else if (!entity.empty() && entity[0] == '#') {
                int base = 10;
                std::string digits(entity.substr(1));
                if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
                    base = 16;
                    digits.erase(0, 1);
                }
                char* parse_end = nullptr;
                long code = std::strtol(digits.c_str(), &parse_end, base);
                if (digits.empty() || *parse_end != '\0' || code <= 0 || code > 0x10FFFF)
                    fail("invalid character reference");
                append_utf8(out, std::uint32_t(code));
            } else {
                fail("unknown entity &" + std::string(entity) + ";");
            }
            i = end + 1;
        }
        return out;
    }

    static void append_utf8(std::string& out, std::uint32_t code) {
        if (code < 0x80) {
            out.push_back(char(code));
        } else if (code < 0x800) {
            out.push_back(char(0xC0 | (code >> 6)));
            out.push_back(char(0x80 | (code & 0x3F)));
        } else if (code < 0x10000) {
            out.push_back(char(0xE0 | (code >> 12)));
            out.push_back(char(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(char(0x80 | (code & 0x3F)));
        } else {
            out.push_back(char(0xF0 | (code >> 18)));
            out.push_back(char(0x80 | ((code >> 12) & 0x3F)));
            out.push_back(char(0x80 | ((code >> 6) & 0x3F)));
            out.push_back(char(0x80 | (code & 0x3F)));
        }
    }

    Node parse_element() {
        expect('<');
        Node node;
        node.name = parse_name();
        while (true) {
            skip_whitespace();
            char c = peek();
            if (c == '>') {
                ++pos_;
                break;
            }
            if (c == '/') {
                ++pos_;
                expect('>');
                return node;  // self-closing
            }
            std::string attr = parse_name();
            skip_whitespace();
            expect('=');
            skip_whitespace();
            char quote = take();
            if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
            auto end = text_.find(quote, pos_);
            if (end == std::string_view::npos) fail("unterminated attribute value");
            node.attributes.emplace_back(std::move(attr),
                                         decode_entities(text_.substr(pos_, end - pos_)));
            pos_ = end + 1;
        }

        // content
        while (true) {
            if (pos_ >= text_.size()) fail("unterminated element <" + node.name + ">");
            if (starts_with("</")) {
                pos_ += 2;
                std::string closing = parse_name();
                if (closing != node.name)
                    fail("mismatched closing tag </" + closing + "> for <" + node.name + ">");
                skip_whitespace();
                expect('>');
                trim(node.text);
                return node;
            }
            if (starts_with("<![CDATA[")) {
                pos_ += 9;
                auto end = text_.find("]]>", pos_);
                if (end == std::string_view::npos) fail("unterminated CDATA section");
                node.text.append(text_.substr(pos_, end - pos_));
                pos_ = end + 3;
                continue;
            }
            if (skip_misc()) continue;
            if (peek() == '<') {
                node.children.push_back(parse_element());
                continue;
            }
            auto next = text_.find('<', pos_);
            if (next == std::string_view::npos) fail("unterminated element <" + node.name + ">");
            node.text.append(decode_entities(text_.substr(pos_, next - pos_)));
            pos_ = next;
        }
    }

    static void trim(std::string& s) {
        std::size_t begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) {
            s.clear();
            return;
        }
        std::size_t end = s.find_last_not_of(" \t\r\n");
        s = s.substr(begin, end - begin + 1);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void escape_into(std::ostream& out, std::string_view raw, bool attribute) {
    for (char c : raw) {
        switch (c) {
            case '<': out << "&lt;"; break;
            case '>': out << "&gt;"; break;
            case '&': out << "&amp;"; break;
            case '"':
                if (attribute) out << "&quot;";
                else out << c;
                break;
            default: out << c;
        }
    }
}

void write_node(std::ostream& out, const Node& node, int depth) {
    std::string indent(std::size_t(depth) * 2, ' ');
    out << indent << '<' << node.name;
    for (const auto& [name, value] : node.attributes) {
        out << ' ' << name << "=\"";
        escape_into(out, value, true);
        out << '"';
    }
    if (node.children.empty() && node.text.empty()) {
        out << "/>\n";
        return;
    }
    out << '>';
    if (node.children.empty()) {
        escape_into(out, node.text, false);
        out << "</" << node.name << ">\n";
        return;
    }
    out << '\n';
    for (const auto& child : node.children) write_node(out, child, depth + 1);
    out << indent << "</" << node.name << ">\n";
}

}  // namespace

Node parse(std::string_view text) {
    return Parser(text).run();
}

std::string write(const Node& root) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    write_node(out, root, 0);
    return out.str();
}

}  // namespace musekit::xml
