#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace copwav::toml {

//! A single parsed value from the flat TOML subset this project uses:
//! integers, floats, booleans, double-quoted strings, and arrays of integers.
struct Value {
  enum class Kind { integer, real, boolean, string, int_array } kind;
  long long i = 0;
  double d = 0.0;
  bool b = false;
  std::string s;
  std::vector<long long> a;
};

//! Flat key/value table with consumption tracking so callers can reject
//! keys they never asked for.
class Document {
 public:
  explicit Document(std::map<std::string, Value> values) : values_(std::move(values)) {}

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  const Value& get(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("missing key '" + key + "'");
    consumed_.insert({key, true});
    return it->second;
  }

  long long get_int(const std::string& key) {
    const Value& v = get(key);
    if (v.kind != Value::Kind::integer)
      throw std::invalid_argument("key '" + key + "' is not an integer");
    return v.i;
  }

  double get_real(const std::string& key) {
    const Value& v = get(key);
    if (v.kind == Value::Kind::integer) return double(v.i);
    if (v.kind != Value::Kind::real) throw std::invalid_argument("key '" + key + "' is not a number");
    return v.d;
  }

  bool get_bool(const std::string& key) {
    const Value& v = get(key);
    if (v.kind != Value::Kind::boolean)
      throw std::invalid_argument("key '" + key + "' is not a boolean");
    return v.b;
  }

  std::string get_string(const std::string& key) {
    const Value& v = get(key);
    if (v.kind != Value::Kind::string) throw std::invalid_argument("key '" + key + "' is not a string");
    return v.s;
  }

  std::vector<long long> get_int_array(const std::string& key) {
    const Value& v = get(key);
    if (v.kind == Value::Kind::integer) return {v.i};
    if (v.kind != Value::Kind::int_array)
      throw std::invalid_argument("key '" + key + "' is not an integer array");
    return v.a;
  }

  //! Keys present in the file but never read through get*.
  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (consumed_.find(k) == consumed_.end()) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, Value> values_;
  std::map<std::string, bool> consumed_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_integer(const std::string& s, long long& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stoll(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

inline Value parse_value(const std::string& raw, const std::string& where) {
  Value v;
  if (raw.empty()) throw std::invalid_argument(where + ": empty value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      throw std::invalid_argument(where + ": unterminated string");
    const std::string body = raw.substr(1, raw.size() - 2);
    if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos)
      throw std::invalid_argument(where + ": escapes and embedded quotes are not supported");
    v.kind = Value::Kind::string;
    v.s = body;
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::boolean;
    v.b = (raw == "true");
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') throw std::invalid_argument(where + ": unterminated array");
    v.kind = Value::Kind::int_array;
    const std::string body = raw.substr(1, raw.size() - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t comma = body.find(',', pos);
      if (comma == std::string::npos) comma = body.size();
      const std::string item = trim(body.substr(pos, comma - pos));
      if (!item.empty()) {
        long long n = 0;
        if (!parse_integer(item, n))
          throw std::invalid_argument(where + ": array element '" + item + "' is not an integer");
        v.a.push_back(n);
      } else if (comma != body.size()) {
        throw std::invalid_argument(where + ": empty array element");
      }
      pos = comma + 1;
    }
    return v;
  }
  long long n = 0;
  if (parse_integer(raw, n)) {
    v.kind = Value::Kind::integer;
    v.i = n;
    return v;
  }
  double d = 0.0;
  if (parse_real(raw, d)) {
    v.kind = Value::Kind::real;
    v.d = d;
    return v;
  }
  throw std::invalid_argument(where + ": unrecognized value '" + raw + "'");
}

}  // namespace detail

//! Parse the flat TOML subset: `key = value` lines, blank lines, and
//! `#` comments. Sections, dotted keys, and multi-line constructs are
//! rejected with line-numbered errors.
inline Document parse(const std::string& text, const std::string& name = "<toml>") {
  std::map<std::string, Value> values;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = name + ":" + std::to_string(lineno);
    // Strip comments, but not inside a quoted string.
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line = line.substr(0, i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (line.front() == '[')
      throw std::invalid_argument(where + ": sections are not supported");
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string raw = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument(where + ": empty key");
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
        throw std::invalid_argument(where + ": invalid key '" + key + "'");
    if (values.count(key)) throw std::invalid_argument(where + ": duplicate key '" + key + "'");
    values.emplace(key, detail::parse_value(raw, where));
  }
  return Document(std::move(values));
}

//! Parse a TOML file from disk.
inline Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, path);
}

}  // namespace copwav::toml
