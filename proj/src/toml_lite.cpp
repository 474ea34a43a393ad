#include "rmlab/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rmlab::toml {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// removes a trailing comment, respecting quoted strings
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quoted) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

bool bare_key_ok(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

std::string parse_quoted(const std::string& s, std::size_t& pos, int line) {
  std::string out;
  ++pos;  // opening quote
  while (pos < s.size()) {
    char c = s[pos];
    if (c == '"') {
      ++pos;
      return out;
    }
    if (c == '\\') {
      ++pos;
      if (pos >= s.size()) throw ParseError("dangling escape in string", line);
      switch (s[pos]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: throw ParseError("unsupported escape in string", line);
      }
      ++pos;
      continue;
    }
    out.push_back(c);
    ++pos;
  }
  throw ParseError("unterminated string", line);
}

void skip_spaces(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

Value parse_value(const std::string& s, std::size_t& pos, int line);

Value parse_array(const std::string& s, std::size_t& pos, int line) {
  Value v;
  v.kind = Value::Kind::kArray;
  v.line = line;
  ++pos;  // '['
  skip_spaces(s, pos);
  if (pos < s.size() && s[pos] == ']') {
    ++pos;
    return v;
  }
  while (true) {
    v.array.push_back(parse_value(s, pos, line));
    skip_spaces(s, pos);
    if (pos >= s.size()) throw ParseError("unterminated array", line);
    if (s[pos] == ',') {
      ++pos;
      skip_spaces(s, pos);
      continue;
    }
    if (s[pos] == ']') {
      ++pos;
      break;
    }
    throw ParseError("expected ',' or ']' in array", line);
  }
  // homogeneous up to int -> float promotion
  bool any_float = false, any_int = false;
  for (const Value& e : v.array) {
    any_float |= e.kind == Value::Kind::kFloat;
    any_int |= e.kind == Value::Kind::kInt;
  }
  if (any_float && any_int) {
    for (Value& e : v.array) {
      if (e.kind == Value::Kind::kInt) {
        e.kind = Value::Kind::kFloat;
        e.real = double(e.integer);
      }
    }
  }
  for (const Value& e : v.array) {
    if (e.kind != v.array.front().kind) throw ParseError("mixed types in array", line);
    if (e.kind == Value::Kind::kArray) throw ParseError("nested arrays are not supported", line);
  }
  return v;
}

Value parse_scalar_token(const std::string& tok, int line) {
  Value v;
  v.line = line;
  if (tok == "true" || tok == "false") {
    v.kind = Value::Kind::kBool;
    v.boolean = tok == "true";
    return v;
  }
  {
    std::int64_t iv = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
    if (ec == std::errc() && p == tok.data() + tok.size()) {
      v.kind = Value::Kind::kInt;
      v.integer = iv;
      return v;
    }
  }
  {
    char* end = nullptr;
    double dv = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() + tok.size() && !tok.empty()) {
      v.kind = Value::Kind::kFloat;
      v.real = dv;
      return v;
    }
  }
  throw ParseError("cannot parse value '" + tok + "'", line);
}

Value parse_value(const std::string& s, std::size_t& pos, int line) {
  skip_spaces(s, pos);
  if (pos >= s.size()) throw ParseError("missing value", line);
  if (s[pos] == '"') {
    Value v;
    v.kind = Value::Kind::kString;
    v.line = line;
    v.str = parse_quoted(s, pos, line);
    return v;
  }
  if (s[pos] == '[') return parse_array(s, pos, line);
  std::size_t start = pos;
  while (pos < s.size() && s[pos] != ',' && s[pos] != ']' && s[pos] != ' ' && s[pos] != '\t') {
    ++pos;
  }
  return parse_scalar_token(s.substr(start, pos - start), line);
}

const char* kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::kString: return "string";
    case Value::Kind::kInt: return "integer";
    case Value::Kind::kFloat: return "float";
    case Value::Kind::kBool: return "boolean";
    case Value::Kind::kArray: return "array";
  }
  return "?";
}

[[noreturn]] void type_error(const Value& v, const char* wanted) {
  throw ParseError(std::string("expected ") + wanted + ", got " + kind_name(v.kind), v.line);
}

}  // namespace

const std::string& Value::as_string() const {
  if (kind != Kind::kString) type_error(*this, "string");
  return str;
}

std::int64_t Value::as_int() const {
  if (kind != Kind::kInt) type_error(*this, "integer");
  return integer;
}

double Value::as_double() const {
  if (kind == Kind::kInt) return double(integer);
  if (kind != Kind::kFloat) type_error(*this, "float");
  return real;
}

bool Value::as_bool() const {
  if (kind != Kind::kBool) type_error(*this, "boolean");
  return boolean;
}

std::vector<std::int64_t> Value::as_int_list() const {
  if (kind != Kind::kArray) type_error(*this, "array of integers");
  std::vector<std::int64_t> out;
  for (const Value& e : array) out.push_back(e.as_int());
  return out;
}

std::vector<double> Value::as_double_list() const {
  if (kind != Kind::kArray) type_error(*this, "array of floats");
  std::vector<double> out;
  for (const Value& e : array) out.push_back(e.as_double());
  return out;
}

std::vector<std::string> Value::as_string_list() const {
  if (kind != Kind::kArray) type_error(*this, "array of strings");
  std::vector<std::string> out;
  for (const Value& e : array) out.push_back(e.as_string());
  return out;
}

const Table& Document::at(const std::string& section) const {
  auto it = sections.find(section);
  if (it == sections.end()) {
    throw std::out_of_range("missing section [" + section + "]");
  }
  return it->second;
}

Document parse(const std::string& text) {
  Document doc;
  std::istringstream in(text);
  std::string raw;
  std::string current;
  doc.sections[current];
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      std::string name = trim(line.substr(1, line.size() - 2));
      if (!bare_key_ok(name)) throw ParseError("bad section name '" + name + "'", line_no);
      if (doc.sections.count(name)) throw ParseError("duplicate section [" + name + "]", line_no);
      doc.sections[name];
      current = name;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    std::string key = trim(line.substr(0, eq));
    if (!bare_key_ok(key)) throw ParseError("bad key '" + key + "'", line_no);
    Table& table = doc.sections[current];
    if (table.count(key)) throw ParseError("duplicate key '" + key + "'", line_no);
    std::string rest = line.substr(eq + 1);
    std::size_t pos = 0;
    Value v = parse_value(rest, pos, line_no);
    skip_spaces(rest, pos);
    if (pos != rest.size()) throw ParseError("trailing characters after value", line_no);
    table.emplace(key, std::move(v));
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace rmlab::toml
