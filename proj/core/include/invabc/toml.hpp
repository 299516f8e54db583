#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace invabc::toml {

/// Parsed TOML document fragment. The accepted grammar is the subset the run
/// configs use: bare keys, [table] and [[array-of-tables]] headers (dotted
/// paths allowed in headers), basic and literal strings, integers, floats,
/// booleans, and arrays that may span lines. Dotted keys, inline tables and
/// datetimes are rejected with an error naming the line.
class Value {
public:
    enum class Kind { Table, Array, String, Integer, Float, Boolean };

    using Table = std::map<std::string, Value>;
    using Array = std::vector<Value>;

    Kind kind = Kind::Table;
    int line = 0;

    Table table;
    Array array;
    std::string str;
    std::int64_t integer = 0;
    double real = 0.0;
    bool boolean = false;

    bool is_table() const { return kind == Kind::Table; }
    bool is_array() const { return kind == Kind::Array; }

    bool contains(const std::string& key) const;
    /// Null when absent; requires a table.
    const Value* find(const std::string& key) const;
    /// ConfigError naming the key when absent.
    const Value& at(const std::string& key) const;

    const std::string& as_string() const;
    std::int64_t as_int() const;
    /// Integers promote.
    double as_double() const;
    bool as_bool() const;
    const Array& as_array() const;
    const Table& as_table() const;

private:
    [[noreturn]] void type_fail(const char* want) const;
};

/// Parses a whole document; origin is used in error messages ("origin:line:").
Value parse(std::string_view text, const std::string& origin = "<toml>");

Value parse_file(const std::string& path);

} // namespace invabc::toml
