#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace tvlearn {

/// Flat key=value settings with dotted keys ("solver.gamma = 100").
/// Blank lines and lines starting with '#' are ignored; later assignments win.
class Config {
public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated numbers; empty string gives an empty list.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Throws PreconditionError naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  /// Canonical "key=value\n" lines in key order.
  std::string canonical() const;
  /// FNV-1a (64 bit) of canonical().
  std::uint64_t hash() const;

private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace tvlearn
