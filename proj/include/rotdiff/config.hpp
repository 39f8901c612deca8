#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rotdiff {

/// Flat key=value config file. Lines are `key = value`; blank lines and
/// lines starting with # are skipped. Keys may appear once. Every key must
/// be consumed by a typed getter before finish() is called: leftover keys
/// are reported as unknown, so typos fail loudly instead of silently
/// falling back to defaults.
class KvConfig {
 public:
  static KvConfig from_file(const std::string& path);
  static KvConfig from_text(const std::string& text, const std::string& origin = "<text>");
  /// For rebuilding a config from checkpoint hyperparameters.
  static KvConfig from_pairs(const std::map<std::string, std::string>& pairs);

  /// Typed getters record the key as consumed and remember the resolved
  /// value (default or parsed) for echoing.
  std::string get_string(const std::string& key, const std::string& def);
  double get_double(const std::string& key, double def);
  int get_int(const std::string& key, int def);
  int64_t get_i64(const std::string& key, int64_t def);
  uint64_t get_u64(const std::string& key, uint64_t def);

  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  /// Throws std::runtime_error naming every unconsumed key.
  void finish() const;

  /// Resolved key=value pairs (sorted), for echoing and checkpoints.
  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  std::string echo() const;  // one `key = value` line per resolved key

 private:
  std::map<std::string, std::string> raw_;
  std::map<std::string, bool> consumed_;
  std::map<std::string, std::string> resolved_;
  std::string origin_;

  const std::string* take(const std::string& key);
};

}  // namespace rotdiff
