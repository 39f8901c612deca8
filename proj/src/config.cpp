#include "rotdiff/config.hpp"

#include <cstdlib>
#include <stdexcept>

#include "rotdiff/util.hpp"

namespace rotdiff {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw std::runtime_error("config " + origin + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  return from_text(read_file(path), path);
}

KvConfig KvConfig::from_text(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  cfg.origin_ = origin;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, lineno, "empty key");
    if (!cfg.raw_.emplace(key, value).second) fail(origin, lineno, "duplicate key '" + key + "'");
  }
  return cfg;
}

KvConfig KvConfig::from_pairs(const std::map<std::string, std::string>& pairs) {
  KvConfig cfg;
  cfg.origin_ = "<pairs>";
  cfg.raw_ = pairs;
  return cfg;
}

const std::string* KvConfig::take(const std::string& key) {
  auto it = raw_.find(key);
  if (it == raw_.end()) return nullptr;
  consumed_[key] = true;
  return &it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& def) {
  const std::string* v = take(key);
  std::string out = v ? *v : def;
  resolved_[key] = out;
  return out;
}

double KvConfig::get_double(const std::string& key, double def) {
  const std::string* v = take(key);
  double out = def;
  if (v) {
    const char* s = v->c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    if (end == s || *end != '\0')
      throw std::runtime_error("config " + origin_ + ": key '" + key + "' is not a number: " + *v);
  }
  resolved_[key] = fmt17(out);
  return out;
}

int64_t KvConfig::get_i64(const std::string& key, int64_t def) {
  const std::string* v = take(key);
  int64_t out = def;
  if (v) {
    const char* s = v->c_str();
    char* end = nullptr;
    out = std::strtoll(s, &end, 10);
    if (end == s || *end != '\0')
      throw std::runtime_error("config " + origin_ + ": key '" + key +
                               "' is not an integer: " + *v);
  }
  resolved_[key] = std::to_string(out);
  return out;
}

int KvConfig::get_int(const std::string& key, int def) {
  return static_cast<int>(get_i64(key, def));
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t def) {
  const std::string* v = take(key);
  uint64_t out = def;
  if (v) {
    const char* s = v->c_str();
    char* end = nullptr;
    out = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0')
      throw std::runtime_error("config " + origin_ + ": key '" + key +
                               "' is not an unsigned integer: " + *v);
  }
  resolved_[key] = std::to_string(out);
  return out;
}

void KvConfig::finish() const {
  std::string unknown;
  for (const auto& [key, value] : raw_) {
    if (!consumed_.count(key)) unknown += unknown.empty() ? key : ", " + key;
  }
  if (!unknown.empty())
    throw std::runtime_error("config " + origin_ + ": unknown keys: " + unknown);
}

std::string KvConfig::echo() const {
  std::string out;
  for (const auto& [key, value] : resolved_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace rotdiff
