#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace blink {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat dotted-key store over a fixed schema. Files use nested brace
// sections; --set overrides use dotted paths. Unknown keys and ill-typed
// values are rejected at set time. finalize() fills preset-driven defaults
// for keys the user never touched.
class Config {
 public:
  static Config defaults();

  void apply_file(const std::string& path);
  void apply_text(const std::string& text, const std::string& what);
  void apply_override(const std::string& key_eq_value);  // "a.b=v"
  void set(const std::string& key, const std::string& value);
  void finalize();

  bool explicitly_set(const std::string& key) const;
  int get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  // Nested-section rendering; parseable by apply_text. Stable order.
  std::string canonical_text() const;

 private:
  struct Entry {
    std::string value;
    bool explicit_set = false;
  };
  std::map<std::string, Entry> entries_;
  bool finalized_ = false;

  const Entry& lookup(const std::string& key) const;
};

}  // namespace blink
