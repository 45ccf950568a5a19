#include "toml_lite.hpp"

#include "splatsim/types.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

namespace splatsim::toml {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw ParseError("config line " + std::to_string(line) + ": " + what);
}

bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

struct Cursor {
    const std::string& s;
    std::size_t pos = 0;
    std::size_t line;

    bool done() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    void skip_ws() {
        while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
};

std::string parse_basic_string(Cursor& c) {
    ++c.pos; // opening quote
    std::string out;
    while (true) {
        if (c.done()) fail(c.line, "unterminated string");
        const char ch = c.s[c.pos++];
        if (ch == '"') return out;
        if (ch != '\\') {
            out.push_back(ch);
            continue;
        }
        if (c.done()) fail(c.line, "dangling escape in string");
        const char esc = c.s[c.pos++];
        switch (esc) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        default: fail(c.line, std::string("unsupported escape \\") + esc);
        }
    }
}

Value parse_scalar(Cursor& c);

Value parse_array(Cursor& c) {
    ++c.pos; // '['
    Value::Array items;
    while (true) {
        c.skip_ws();
        if (c.done()) fail(c.line, "unterminated array");
        if (c.peek() == ']') {
            ++c.pos;
            return Value(std::move(items));
        }
        items.push_back(parse_scalar(c));
        c.skip_ws();
        if (c.done()) fail(c.line, "unterminated array");
        if (c.peek() == ',') {
            ++c.pos;
            continue;
        }
        if (c.peek() == ']') {
            ++c.pos;
            return Value(std::move(items));
        }
        fail(c.line, "expected ',' or ']' in array");
    }
}

Value parse_number(Cursor& c) {
    const std::size_t start = c.pos;
    bool is_float = false;
    while (!c.done()) {
        const char ch = c.peek();
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-') {
            ++c.pos;
        } else if (ch == '.' || ch == 'e' || ch == 'E') {
            is_float = true;
            ++c.pos;
        } else {
            break;
        }
    }
    const std::string tok = c.s.substr(start, c.pos - start);
    if (tok.empty() || tok == "+" || tok == "-") fail(c.line, "malformed number");
    errno = 0;
    char* end = nullptr;
    if (is_float) {
        const double d = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || errno == ERANGE)
            fail(c.line, "malformed number '" + tok + "'");
        return Value(d);
    }
    const long long i = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || errno == ERANGE)
        fail(c.line, "malformed integer '" + tok + "'");
    return Value(static_cast<std::int64_t>(i));
}

Value parse_scalar(Cursor& c) {
    c.skip_ws();
    if (c.done()) fail(c.line, "missing value");
    const char ch = c.peek();
    if (ch == '"') return Value(parse_basic_string(c));
    if (ch == '[') return parse_array(c);
    if (c.s.compare(c.pos, 4, "true") == 0 && (c.pos + 4 >= c.s.size() || !is_bare_char(c.s[c.pos + 4]))) {
        c.pos += 4;
        return Value(true);
    }
    if (c.s.compare(c.pos, 5, "false") == 0 && (c.pos + 5 >= c.s.size() || !is_bare_char(c.s[c.pos + 5]))) {
        c.pos += 5;
        return Value(false);
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' || ch == '.')
        return parse_number(c);
    fail(c.line, std::string("unexpected value starting with '") + ch + "'");
}

/// Strips comments (respecting strings) and trailing whitespace.
std::string strip_comment(const std::string& raw, std::size_t line) {
    std::string out;
    bool in_string = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char ch = raw[i];
        if (ch == '"' ) in_string = !in_string;
        if (ch == '\\' && in_string && i + 1 < raw.size()) {
            out.push_back(ch);
            out.push_back(raw[++i]);
            continue;
        }
        if (ch == '#' && !in_string) break;
        out.push_back(ch);
    }
    if (in_string) fail(line, "unterminated string");
    while (!out.empty() && (out.back() == ' ' || out.back() == '\t' || out.back() == '\r'))
        out.pop_back();
    return out;
}

std::vector<std::string> parse_key_path(const std::string& s, std::size_t line) {
    std::vector<std::string> path;
    std::string cur;
    for (char ch : s) {
        if (ch == '.') {
            if (cur.empty()) fail(line, "empty key segment in '" + s + "'");
            path.push_back(cur);
            cur.clear();
        } else if (is_bare_char(ch)) {
            cur.push_back(ch);
        } else if (ch == ' ' || ch == '\t') {
            continue;
        } else {
            fail(line, std::string("invalid character '") + ch + "' in key '" + s + "'");
        }
    }
    if (cur.empty()) fail(line, "empty key segment in '" + s + "'");
    path.push_back(cur);
    return path;
}

/// Walks/creates nested tables along `path`; the last array-of-tables
/// element is entered when encountered.
Value::Table* descend(Value::Table* t, const std::vector<std::string>& path, std::size_t line) {
    for (const auto& key : path) {
        Value& slot = (*t)[key];
        if (slot.is_table()) {
            t = &slot.as_table();
        } else if (slot.is_array() && !slot.as_array().empty() &&
                   slot.as_array().back().is_table()) {
            t = &slot.as_array().back().as_table();
        } else if (!slot.is_bool() && !slot.is_number() && !slot.is_string() && !slot.is_array()) {
            slot = Value(Value::Table{});
            t = &slot.as_table();
        } else {
            fail(line, "key '" + key + "' already holds a value, cannot open a table");
        }
    }
    return t;
}

} // namespace

const char* Value::type_name() const {
    switch (v_.index()) {
    case 1: return "boolean";
    case 2: return "integer";
    case 3: return "float";
    case 4: return "string";
    case 5: return "array";
    case 6: return "table";
    default: return "none";
    }
}

Value::Table parse(const std::string& text) {
    Value::Table root;
    Value::Table* current = &root;

    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = strip_comment(raw, line_no);
        std::size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) continue;

        if (line[i] == '[') {
            const bool array_table = i + 1 < line.size() && line[i + 1] == '[';
            const std::size_t open = i + (array_table ? 2 : 1);
            const std::string closer = array_table ? "]]" : "]";
            const std::size_t close = line.find(closer, open);
            if (close == std::string::npos || close + closer.size() != line.size())
                fail(line_no, "malformed section header '" + line.substr(i) + "'");
            const auto path = parse_key_path(line.substr(open, close - open), line_no);

            if (array_table) {
                Value::Table* parent = &root;
                if (path.size() > 1)
                    parent = descend(parent, {path.begin(), path.end() - 1}, line_no);
                Value& slot = (*parent)[path.back()];
                if (slot.is_array()) {
                    slot.as_array().push_back(Value(Value::Table{}));
                } else if (!slot.is_bool() && !slot.is_number() && !slot.is_string() &&
                           !slot.is_table()) {
                    slot = Value(Value::Array{Value(Value::Table{})});
                } else {
                    fail(line_no, "key '" + path.back() + "' is not an array of tables");
                }
                current = &slot.as_array().back().as_table();
            } else {
                current = descend(&root, path, line_no);
            }
            continue;
        }

        const std::size_t eq = line.find('=', i);
        if (eq == std::string::npos) fail(line_no, "expected 'key = value': '" + line + "'");
        const auto path = parse_key_path(line.substr(i, eq - i), line_no);

        Cursor cursor{line, eq + 1, line_no};
        const Value value = parse_scalar(cursor);
        cursor.skip_ws();
        if (!cursor.done()) fail(line_no, "trailing characters after value");

        Value::Table* target = current;
        if (path.size() > 1) target = descend(target, {path.begin(), path.end() - 1}, line_no);
        if (target->count(path.back())) fail(line_no, "duplicate key '" + path.back() + "'");
        (*target)[path.back()] = value;
    }
    return root;
}

} // namespace splatsim::toml
