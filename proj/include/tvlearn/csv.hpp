#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace tvlearn {

/// Provenance lines written as '#'-prefixed comments before the column row.
struct CsvMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

/// LF-terminated CSV; every row is flushed so partial traces survive failures.
class CsvWriter {
public:
  CsvWriter(const std::string& path, const CsvMeta& meta, std::vector<std::string> columns);

  /// Cells are already formatted; quoted when they contain ',', '"' or a newline.
  void row(const std::vector<std::string>& cells);

private:
  std::ofstream out_;
  std::size_t ncols_;
};

/// Round-trip decimal form ("%.17g"), identical across runs for identical doubles.
std::string fmt(double v);
std::string fmt(long long v);
inline std::string fmt(int v) { return fmt(static_cast<long long>(v)); }
inline std::string fmt(std::size_t v) { return fmt(static_cast<long long>(v)); }

}  // namespace tvlearn
