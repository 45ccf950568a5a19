#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace splatsim::toml {

/// Minimal TOML subset: [section.path] tables, [[path]] arrays of tables,
/// key = value lines (dotted keys descend) with strings, booleans, integers,
/// floats and single-line arrays, # comments. Enough for simulation configs;
/// inline tables and multi-line strings are not accepted.
class Value {
public:
    using Array = std::vector<Value>;
    using Table = std::map<std::string, Value>;

    Value() : v_(std::monostate{}) {}
    explicit Value(bool b) : v_(b) {}
    explicit Value(std::int64_t i) : v_(i) {}
    explicit Value(double d) : v_(d) {}
    explicit Value(std::string s) : v_(std::move(s)) {}
    explicit Value(Array a) : v_(std::move(a)) {}
    explicit Value(Table t) : v_(std::move(t)) {}

    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(v_); }
    bool is_number() const { return is_integer() || std::holds_alternative<double>(v_); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_array() const { return std::holds_alternative<Array>(v_); }
    bool is_table() const { return std::holds_alternative<Table>(v_); }

    bool as_bool() const { return std::get<bool>(v_); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
    /// Integers promote to double.
    double as_number() const {
        return is_integer() ? static_cast<double>(std::get<std::int64_t>(v_)) : std::get<double>(v_);
    }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    const Array& as_array() const { return std::get<Array>(v_); }
    const Table& as_table() const { return std::get<Table>(v_); }
    Table& as_table() { return std::get<Table>(v_); }
    Array& as_array() { return std::get<Array>(v_); }

    const char* type_name() const;

private:
    std::variant<std::monostate, bool, std::int64_t, double, std::string, Array, Table> v_;
};

/// Parses a whole document into the root table. Throws ParseError with a
/// line number on malformed input.
Value::Table parse(const std::string& text);

} // namespace splatsim::toml
