#include "bread/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "bread/errors.hpp"

namespace bread {

namespace {

using Value = ConfigDoc::Value;

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw Error(ErrorKind::config,
              origin + ":" + std::to_string(line) + ": " + msg);
}

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Cursor {
  const std::string& text;
  size_t pos = 0;
  const std::string& origin;
  int line;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void skip_ws() {
    while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
  }
};

std::string parse_quoted(Cursor& c) {
  ++c.pos;  // opening quote
  std::string out;
  while (true) {
    if (c.done()) fail(c.origin, c.line, "unterminated string");
    char ch = c.text[c.pos++];
    if (ch == '"') return out;
    if (ch != '\\') {
      out.push_back(ch);
      continue;
    }
    if (c.done()) fail(c.origin, c.line, "dangling escape");
    char esc = c.text[c.pos++];
    switch (esc) {
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      default:
        fail(c.origin, c.line, std::string("unknown escape \\") + esc);
    }
  }
}

Value parse_scalar_token(Cursor& c) {
  Value v;
  if (c.peek() == '"') {
    v.type = Value::Type::string_;
    v.s = parse_quoted(c);
    return v;
  }
  size_t start = c.pos;
  while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '#' &&
         c.peek() != ' ' && c.peek() != '\t')
    ++c.pos;
  std::string tok = c.text.substr(start, c.pos - start);
  if (tok.empty()) fail(c.origin, c.line, "expected a value");
  if (tok == "true" || tok == "false") {
    v.type = Value::Type::boolean;
    v.b = tok == "true";
    return v;
  }
  bool integral = true;
  for (size_t i = 0; i < tok.size(); ++i) {
    char ch = tok[i];
    if (i == 0 && (ch == '+' || ch == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      integral = false;
      break;
    }
  }
  if (integral && tok != "+" && tok != "-") {
    try {
      v.type = Value::Type::integer;
      v.i = std::stoll(tok);
      return v;
    } catch (const std::exception&) {
      fail(c.origin, c.line, "integer out of range: " + tok);
    }
  }
  try {
    size_t consumed = 0;
    v.type = Value::Type::floating;
    v.d = std::stod(tok, &consumed);
    if (consumed != tok.size()) fail(c.origin, c.line, "bad value: " + tok);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(c.origin, c.line, "bad value: " + tok);
  }
}

Value parse_value(Cursor& c) {
  c.skip_ws();
  if (c.done()) fail(c.origin, c.line, "missing value");
  if (c.peek() != '[') return parse_scalar_token(c);

  Value arr;
  arr.type = Value::Type::array;
  ++c.pos;
  while (true) {
    c.skip_ws();
    if (c.done()) fail(c.origin, c.line, "unterminated array");
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    arr.items.push_back(parse_scalar_token(c));
    c.skip_ws();
    if (c.done()) fail(c.origin, c.line, "unterminated array");
    if (c.peek() == ',') {
      ++c.pos;
      continue;
    }
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    fail(c.origin, c.line, "expected ',' or ']' in array");
  }
}

std::string type_name(Value::Type t) {
  switch (t) {
    case Value::Type::string_: return "string";
    case Value::Type::integer: return "integer";
    case Value::Type::floating: return "float";
    case Value::Type::boolean: return "bool";
    case Value::Type::array: return "array";
  }
  return "?";
}

void validate_key_path(const std::string& path, const std::string& origin, int line) {
  if (path.empty() || path.front() == '.' || path.back() == '.')
    fail(origin, line, "bad key: '" + path + "'");
  char prev = '.';
  for (char ch : path) {
    if (ch == '.') {
      if (prev == '.') fail(origin, line, "bad key: '" + path + "'");
    } else if (!bare_key_char(ch)) {
      fail(origin, line, std::string("bad character '") + ch + "' in key '" + path + "'");
    }
    prev = ch;
  }
}

}  // namespace

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

ConfigDoc ConfigDoc::parse_string(const std::string& text, const std::string& origin) {
  ConfigDoc doc;
  doc.origin_ = origin;

  std::istringstream in(text);
  std::string raw;
  std::string table;
  std::vector<std::string> seen_tables;
  int line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line.front() == '[') {
      size_t close = line.find(']');
      if (close == std::string::npos) fail(origin, line_no, "unterminated table header");
      std::string rest = trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#')
        fail(origin, line_no, "unexpected text after table header");
      table = trim(line.substr(1, close - 1));
      validate_key_path(table, origin, line_no);
      for (const auto& prior : seen_tables)
        if (prior == table) fail(origin, line_no, "table reopened: [" + table + "]");
      seen_tables.push_back(table);
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    validate_key_path(key, origin, line_no);

    Cursor cur{line, eq + 1, origin, line_no};
    Value value = parse_value(cur);
    cur.skip_ws();
    if (!cur.done() && cur.peek() != '#')
      fail(origin, line_no, "unexpected text after value");

    std::string full = table.empty() ? key : table + "." + key;
    if (doc.values_.count(full)) fail(origin, line_no, "duplicate key: " + full);
    doc.values_[full] = std::move(value);
    doc.order_.push_back(full);
  }
  return doc;
}

bool ConfigDoc::has(const std::string& key) const { return values_.count(key) > 0; }

const Value& ConfigDoc::require(const std::string& key, Value::Type want) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw Error(ErrorKind::config, origin_ + ": missing key '" + key + "'");
  const Value& v = it->second;
  bool ok = v.type == want ||
            (want == Value::Type::floating && v.type == Value::Type::integer);
  if (!ok)
    throw Error(ErrorKind::config, origin_ + ": key '" + key + "' is " +
                                       type_name(v.type) + ", wanted " +
                                       type_name(want));
  return v;
}

std::string ConfigDoc::get_string(const std::string& key) const {
  return require(key, Value::Type::string_).s;
}
std::string ConfigDoc::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}
int64_t ConfigDoc::get_int(const std::string& key) const {
  return require(key, Value::Type::integer).i;
}
int64_t ConfigDoc::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}
double ConfigDoc::get_double(const std::string& key) const {
  const Value& v = require(key, Value::Type::floating);
  return v.type == Value::Type::integer ? static_cast<double>(v.i) : v.d;
}
double ConfigDoc::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}
bool ConfigDoc::get_bool(const std::string& key) const {
  return require(key, Value::Type::boolean).b;
}
bool ConfigDoc::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> ConfigDoc::get_string_array(const std::string& key) const {
  const Value& v = require(key, Value::Type::array);
  std::vector<std::string> out;
  for (const auto& item : v.items) {
    if (item.type != Value::Type::string_)
      throw Error(ErrorKind::config, origin_ + ": '" + key + "' must hold strings");
    out.push_back(item.s);
  }
  return out;
}

std::vector<int64_t> ConfigDoc::get_int_array(const std::string& key) const {
  const Value& v = require(key, Value::Type::array);
  std::vector<int64_t> out;
  for (const auto& item : v.items) {
    if (item.type != Value::Type::integer)
      throw Error(ErrorKind::config, origin_ + ": '" + key + "' must hold integers");
    out.push_back(item.i);
  }
  return out;
}

std::vector<double> ConfigDoc::get_double_array(const std::string& key) const {
  const Value& v = require(key, Value::Type::array);
  std::vector<double> out;
  for (const auto& item : v.items) {
    if (item.type == Value::Type::integer)
      out.push_back(static_cast<double>(item.i));
    else if (item.type == Value::Type::floating)
      out.push_back(item.d);
    else
      throw Error(ErrorKind::config, origin_ + ": '" + key + "' must hold numbers");
  }
  return out;
}

}  // namespace bread
