#pragma once

// Tabular output: one header, rows of JSON values, written as CSV and as a
// JSONL mirror with the same keys in the same order.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "anisoperc/error.hpp"

namespace anisoperc {

using ojson = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Shortest decimal that round-trips; "nan"/"inf" for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// NaN and infinities become null in JSON.
inline ojson num(double x) { return std::isfinite(x) ? ojson(x) : ojson(nullptr); }

inline std::string csv_cell(const ojson& v) {
  if (v.is_null()) return "nan";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

class Table {
public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<ojson>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  // Row given as an object whose keys must equal the header, in order.
  void add(ojson row) {
    if (!row.is_object() || row.size() != header_.size())
      throw std::logic_error("Table::add: row does not match header");
    std::size_t i = 0;
    for (auto it = row.begin(); it != row.end(); ++it, ++i)
      if (it.key() != header_[i]) throw std::logic_error("Table::add: key '" + it.key() + "' out of order");
    rows_.push_back(std::move(row));
  }

  std::string csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << '\n';
    for (const auto& row : rows_) {
      std::size_t i = 0;
      for (const auto& v : row) os << (i++ ? "," : "") << csv_cell(v);
      os << '\n';
    }
    return os.str();
  }

  std::string jsonl() const {
    std::string out;
    for (const auto& row : rows_) out += row.dump() + "\n";
    return out;
  }

private:
  std::vector<std::string> header_;
  std::vector<ojson> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SpecError("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Writes <dir>/<stem>.csv and <dir>/<stem>.jsonl.
inline void write_table(const std::filesystem::path& dir, const std::string& stem, const Table& table) {
  write_text(dir / (stem + ".csv"), table.csv());
  write_text(dir / (stem + ".jsonl"), table.jsonl());
}

// Minimal CSV reader (quoted cells supported); first line is the header.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline CsvData parse_csv(const std::string& text) {
  CsvData data;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (first) {
      data.header = std::move(cells);
      first = false;
    } else {
      data.rows.push_back(std::move(cells));
    }
  }
  return data;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s.empty()) return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw SpecError("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw SpecError("not a number: '" + s + "'");
  return x;
}

// 64-bit FNV-1a, used to tag outputs with the manifest that produced them.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace anisoperc
