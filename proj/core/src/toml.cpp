#include "invabc/toml.hpp"

#include "invabc/errors.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace invabc::toml {

namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

bool key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Cuts a trailing comment and counts the net bracket depth, both only
/// outside string literals. Strings must close before the line ends.
std::string strip_comment(std::string_view line, int* depth, const std::string& origin,
                          int lineno) {
    std::string out;
    out.reserve(line.size());
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quote != 0) {
            if (quote == '"' && c == '\\') {
                out += c;
                if (i + 1 < line.size()) out += line[++i];
                continue;
            }
            if (c == quote) quote = 0;
            out += c;
            continue;
        }
        if (c == '"' || c == '\'') {
            quote = c;
            out += c;
            continue;
        }
        if (c == '#') break;
        if (c == '[') ++*depth;
        if (c == ']') --*depth;
        out += c;
    }
    if (quote != 0) fail(origin, lineno, "unterminated string");
    return out;
}

struct Cursor {
    const std::string& s;
    std::size_t i = 0;
    const std::string& origin;
    int line = 0;

    bool done() const { return i >= s.size(); }
    char peek() const { return s[i]; }
    void skip_ws() {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    }
    [[noreturn]] void fail_here(const std::string& msg) const { fail(origin, line, msg); }
};

Value parse_basic_string(Cursor& c) {
    Value v;
    v.kind = Value::Kind::String;
    ++c.i;
    while (!c.done()) {
        char ch = c.s[c.i++];
        if (ch == '"') return v;
        if (ch != '\\') {
            v.str += ch;
            continue;
        }
        if (c.done()) c.fail_here("unterminated string");
        char e = c.s[c.i++];
        switch (e) {
        case '"': v.str += '"'; break;
        case '\\': v.str += '\\'; break;
        case 'b': v.str += '\b'; break;
        case 't': v.str += '\t'; break;
        case 'n': v.str += '\n'; break;
        case 'f': v.str += '\f'; break;
        case 'r': v.str += '\r'; break;
        default: c.fail_here(std::string("unsupported escape '\\") + e + "'");
        }
    }
    c.fail_here("unterminated string");
}

Value parse_literal_string(Cursor& c) {
    Value v;
    v.kind = Value::Kind::String;
    ++c.i;
    while (!c.done()) {
        char ch = c.s[c.i++];
        if (ch == '\'') return v;
        v.str += ch;
    }
    c.fail_here("unterminated string");
}

Value parse_number(Cursor& c) {
    std::string token;
    while (!c.done()) {
        char ch = c.peek();
        if (ch == ' ' || ch == '\t' || ch == ',' || ch == ']') break;
        token += ch;
        ++c.i;
    }
    if (token.empty()) c.fail_here("missing value");
    if (token.find(':') != std::string::npos)
        c.fail_here("datetimes are not supported");
    for (std::size_t i = 1; i < token.size(); ++i)
        if (token[i] == '-' && token[i - 1] != 'e' && token[i - 1] != 'E')
            c.fail_here("datetimes are not supported");
    if (token.size() > 1 && token[0] == '0' &&
        (token[1] == 'x' || token[1] == 'o' || token[1] == 'b'))
        c.fail_here("prefixed integers are not supported");

    std::string cleaned;
    for (char ch : token)
        if (ch != '_') cleaned += ch;
    bool is_float = false;
    for (char ch : cleaned) {
        if (ch == '.' || ch == 'e' || ch == 'E') is_float = true;
        if (std::isdigit(static_cast<unsigned char>(ch)) == 0 && ch != '+' && ch != '-' &&
            ch != '.' && ch != 'e' && ch != 'E')
            c.fail_here("bad value '" + token + "'");
    }

    Value v;
    errno = 0;
    char* end = nullptr;
    if (is_float) {
        v.kind = Value::Kind::Float;
        v.real = std::strtod(cleaned.c_str(), &end);
        if (end != cleaned.c_str() + cleaned.size() || cleaned.empty())
            c.fail_here("bad value '" + token + "'");
        if (errno == ERANGE || !std::isfinite(v.real))
            c.fail_here("number out of range '" + token + "'");
    } else {
        v.kind = Value::Kind::Integer;
        v.integer = std::strtoll(cleaned.c_str(), &end, 10);
        if (end != cleaned.c_str() + cleaned.size() || cleaned.empty())
            c.fail_here("bad value '" + token + "'");
        if (errno == ERANGE) c.fail_here("integer out of range '" + token + "'");
    }
    return v;
}

Value parse_value(Cursor& c);

Value parse_array(Cursor& c) {
    Value v;
    v.kind = Value::Kind::Array;
    ++c.i;
    c.skip_ws();
    if (!c.done() && c.peek() == ']') {
        ++c.i;
        return v;
    }
    while (true) {
        v.array.push_back(parse_value(c));
        c.skip_ws();
        if (c.done()) c.fail_here("unterminated array");
        char ch = c.peek();
        if (ch == ',') {
            ++c.i;
            c.skip_ws();
            if (!c.done() && c.peek() == ']') {
                ++c.i;
                return v;
            }
            continue;
        }
        if (ch == ']') {
            ++c.i;
            return v;
        }
        c.fail_here("expected ',' or ']' in array");
    }
}

Value parse_value(Cursor& c) {
    c.skip_ws();
    if (c.done()) c.fail_here("missing value");
    char ch = c.peek();
    if (ch == '"') return parse_basic_string(c);
    if (ch == '\'') return parse_literal_string(c);
    if (ch == '[') return parse_array(c);
    if (ch == '{') c.fail_here("inline tables are not supported");
    if (c.s.compare(c.i, 4, "true") == 0 &&
        (c.i + 4 >= c.s.size() || !key_char(c.s[c.i + 4]))) {
        c.i += 4;
        Value v;
        v.kind = Value::Kind::Boolean;
        v.boolean = true;
        return v;
    }
    if (c.s.compare(c.i, 5, "false") == 0 &&
        (c.i + 5 >= c.s.size() || !key_char(c.s[c.i + 5]))) {
        c.i += 5;
        Value v;
        v.kind = Value::Kind::Boolean;
        v.boolean = false;
        return v;
    }
    return parse_number(c);
}

std::vector<std::string> split_path(std::string_view inner, const std::string& origin,
                                    int lineno) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= inner.size(); ++i) {
        if (i == inner.size() || inner[i] == '.') {
            auto part = trim(inner.substr(start, i - start));
            if (part.empty()) fail(origin, lineno, "empty table name component");
            for (char ch : part)
                if (!key_char(ch)) fail(origin, lineno, "bad table name character");
            parts.emplace_back(part);
            start = i + 1;
        }
    }
    return parts;
}

/// Walks one intermediate path component, descending into the last element
/// of an array of tables.
Value* step_into(Value* t, const std::string& part, const std::string& origin, int lineno) {
    auto it = t->table.find(part);
    if (it == t->table.end()) {
        Value child;
        child.kind = Value::Kind::Table;
        child.line = lineno;
        it = t->table.emplace(part, std::move(child)).first;
    }
    Value* v = &it->second;
    if (v->kind == Value::Kind::Array) {
        if (v->array.empty() || v->array.back().kind != Value::Kind::Table)
            fail(origin, lineno, "'" + part + "' is not a table");
        return &v->array.back();
    }
    if (v->kind != Value::Kind::Table) fail(origin, lineno, "'" + part + "' is not a table");
    return v;
}

} // namespace

bool Value::contains(const std::string& key) const { return find(key) != nullptr; }

const Value* Value::find(const std::string& key) const {
    if (kind != Kind::Table) type_fail("a table");
    auto it = table.find(key);
    return it == table.end() ? nullptr : &it->second;
}

const Value& Value::at(const std::string& key) const {
    const Value* v = find(key);
    if (v == nullptr)
        throw ConfigError("line " + std::to_string(line) + ": missing key '" + key + "'");
    return *v;
}

const std::string& Value::as_string() const {
    if (kind != Kind::String) type_fail("a string");
    return str;
}

std::int64_t Value::as_int() const {
    if (kind != Kind::Integer) type_fail("an integer");
    return integer;
}

double Value::as_double() const {
    if (kind == Kind::Integer) return static_cast<double>(integer);
    if (kind != Kind::Float) type_fail("a number");
    return real;
}

bool Value::as_bool() const {
    if (kind != Kind::Boolean) type_fail("a boolean");
    return boolean;
}

const Value::Array& Value::as_array() const {
    if (kind != Kind::Array) type_fail("an array");
    return array;
}

const Value::Table& Value::as_table() const {
    if (kind != Kind::Table) type_fail("a table");
    return table;
}

void Value::type_fail(const char* want) const {
    throw ConfigError("line " + std::to_string(line) + ": expected " + want);
}

Value parse(std::string_view text, const std::string& origin) {
    Value root;
    root.kind = Value::Kind::Table;
    root.line = 1;
    Value* cur = &root;

    std::vector<std::string_view> phys;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            phys.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }

    std::size_t li = 0;
    while (li < phys.size()) {
        int lineno = static_cast<int>(li) + 1;
        int depth = 0;
        std::string logical = strip_comment(phys[li], &depth, origin, lineno);
        ++li;
        if (trim(logical).empty()) continue;

        if (trim(logical).front() != '[') {
            while (depth > 0 && li < phys.size()) {
                int next_line = static_cast<int>(li) + 1;
                logical += ' ';
                logical += strip_comment(phys[li], &depth, origin, next_line);
                ++li;
            }
            if (depth != 0) fail(origin, lineno, "unbalanced brackets");
        }

        std::string_view t = trim(logical);
        if (t.front() == '[') {
            bool aot = t.size() > 1 && t[1] == '[';
            std::string_view close = aot ? "]]" : "]";
            std::size_t open = aot ? 2 : 1;
            if (t.size() < open + close.size() ||
                t.substr(t.size() - close.size()) != close)
                fail(origin, lineno, "malformed table header");
            auto parts =
                split_path(t.substr(open, t.size() - open - close.size()), origin, lineno);
            Value* node = &root;
            for (std::size_t p = 0; p + 1 < parts.size(); ++p)
                node = step_into(node, parts[p], origin, lineno);
            const std::string& last = parts.back();
            auto it = node->table.find(last);
            if (aot) {
                if (it == node->table.end()) {
                    Value arr;
                    arr.kind = Value::Kind::Array;
                    arr.line = lineno;
                    it = node->table.emplace(last, std::move(arr)).first;
                }
                if (it->second.kind != Value::Kind::Array)
                    fail(origin, lineno, "'" + last + "' is not an array of tables");
                Value elem;
                elem.kind = Value::Kind::Table;
                elem.line = lineno;
                it->second.array.push_back(std::move(elem));
                cur = &it->second.array.back();
            } else {
                if (it == node->table.end()) {
                    Value tab;
                    tab.kind = Value::Kind::Table;
                    tab.line = lineno;
                    it = node->table.emplace(last, std::move(tab)).first;
                } else if (it->second.kind != Value::Kind::Table) {
                    fail(origin, lineno, "'" + last + "' is not a table");
                }
                cur = &it->second;
            }
            continue;
        }

        std::size_t eq = logical.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected 'key = value'");
        std::string_view key = trim(std::string_view(logical).substr(0, eq));
        if (key.empty()) fail(origin, lineno, "missing key");
        if (key.find('.') != std::string_view::npos)
            fail(origin, lineno, "dotted keys are not supported");
        if (key.front() == '"' || key.front() == '\'')
            fail(origin, lineno, "quoted keys are not supported");
        for (char ch : key)
            if (!key_char(ch)) fail(origin, lineno, "bad key character");
        std::string key_s(key);
        if (cur->table.count(key_s) != 0) fail(origin, lineno, "duplicate key '" + key_s + "'");

        std::string rest = logical.substr(eq + 1);
        Cursor c{rest, 0, origin, lineno};
        Value v = parse_value(c);
        c.skip_ws();
        if (!c.done()) c.fail_here("unexpected trailing characters");
        v.line = lineno;
        cur->table.emplace(std::move(key_s), std::move(v));
    }
    return root;
}

Value parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

} // namespace invabc::toml
