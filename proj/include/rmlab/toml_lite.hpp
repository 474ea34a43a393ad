#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmlab::toml {

// Minimal TOML subset: [sections], bare keys, strings, integers, floats,
// booleans, single-line homogeneous arrays, and # comments. Errors carry the
// offending line number.

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what, int line_no)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  int line = 0;
};

struct Value {
  enum class Kind { kString, kInt, kFloat, kBool, kArray };
  Kind kind = Kind::kString;
  std::string str;
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<Value> array;
  int line = 0;

  const std::string& as_string() const;
  std::int64_t as_int() const;
  double as_double() const;  // accepts integer values too
  bool as_bool() const;
  std::vector<std::int64_t> as_int_list() const;
  std::vector<double> as_double_list() const;
  std::vector<std::string> as_string_list() const;
};

using Table = std::map<std::string, Value>;

struct Document {
  // section "" holds keys defined before any [section] header
  std::map<std::string, Table> sections;

  bool has(const std::string& section) const { return sections.count(section) > 0; }
  const Table& at(const std::string& section) const;
};

Document parse(const std::string& text);
Document parse_file(const std::string& path);

}  // namespace rmlab::toml
