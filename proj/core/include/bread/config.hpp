#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bread {

/// Parsed key/value document in a restricted TOML-like grammar:
///   - `# comment` lines and trailing comments
///   - `[table]` / `[table.subtable]` headers
///   - `key = value` with value one of: "string" (escapes \" \\ \n \t \r),
///     integer, float, true/false, or a flat array [v1, v2, ...]
/// Keys are addressed with dots: get_string("backend.target.kind").
/// Duplicate keys and reopened tables are errors.
class ConfigDoc {
public:
  struct Value {
    enum class Type { string_, integer, floating, boolean, array };
    Type type = Type::string_;
    std::string s;
    int64_t i = 0;
    double d = 0.0;
    bool b = false;
    std::vector<Value> items;
  };

  static ConfigDoc parse_file(const std::string& path);
  static ConfigDoc parse_string(const std::string& text,
                                const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::vector<std::string> get_string_array(const std::string& key) const;
  std::vector<int64_t> get_int_array(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;

  /// All keys in insertion order; used to echo the effective config.
  const std::vector<std::string>& keys() const { return order_; }

private:
  const Value& require(const std::string& key, Value::Type want) const;

  std::map<std::string, Value> values_;
  std::vector<std::string> order_;
  std::string origin_;
};

}  // namespace bread
