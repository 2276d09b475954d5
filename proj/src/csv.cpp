#include "tvlearn/csv.hpp"

#include <cstdio>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvWriter::CsvWriter(const std::string& path, const CsvMeta& meta, std::vector<std::string> columns)
    : out_(path, std::ios::binary), ncols_(columns.size()) {
  if (!out_) throw IoError("cannot write '" + path + "'");
  out_ << "# tvlearn " << TVLEARN_VERSION << '\n';
  out_ << "# config_hash=" << meta.config_hash << '\n';
  out_ << "# seed=" << meta.seed << '\n';
  for (const auto& [k, v] : meta.extra) out_ << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << quote(columns[i]);
  out_ << '\n';
  out_.flush();
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != ncols_) throw PreconditionError("CsvWriter: row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << quote(cells[i]);
  out_ << '\n';
  out_.flush();
  if (!out_) throw IoError("CSV write failed");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(long long v) { return std::to_string(v); }

}  // namespace tvlearn
