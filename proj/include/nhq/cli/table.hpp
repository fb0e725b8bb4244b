#pragma once

// Rectangular result tables and their CSV / JSON serialization.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nhq/error.hpp"
#include "nhq/numkernel.hpp"

namespace nhq::cli {

using Cell = std::variant<double, std::string>;

// Column-major storage; every column has row_count() cells.
class ResultTable {
 public:
  const std::vector<std::string>& columns() const { return names_; }
  std::size_t column_count() const { return names_.size(); }
  std::size_t row_count() const { return cells_.empty() ? 0 : cells_.front().size(); }
  const Cell& cell(std::size_t row, std::size_t col) const { return cells_.at(col).at(row); }

  void add_column(std::string name, std::vector<Cell> cells) {
    if (!cells_.empty() && cells.size() != row_count())
      throw ShapeMismatch("ResultTable: column '" + name + "' has " + std::to_string(cells.size()) +
                          " rows, expected " + std::to_string(row_count()));
    for (const auto& n : names_)
      if (n == name) throw InvalidArgument("ResultTable: duplicate column '" + name + "'");
    names_.push_back(std::move(name));
    cells_.push_back(std::move(cells));
  }

  void add_real(std::string name, const std::vector<double>& values) {
    add_column(std::move(name), std::vector<Cell>(values.begin(), values.end()));
  }

  void add_complex(const std::string& name, const std::vector<cplx>& values) {
    std::vector<double> re, im;
    for (auto z : values) re.push_back(z.real()), im.push_back(z.imag());
    add_real(name + ".re", re);
    add_real(name + ".im", im);
  }

  void add_text(std::string name, const std::vector<std::string>& values) {
    add_column(std::move(name), std::vector<Cell>(values.begin(), values.end()));
  }

  // Ordered key/value lines written ahead of the data.
  std::vector<std::pair<std::string, std::string>> provenance;

  void note(std::string key, std::string value) { provenance.emplace_back(std::move(key), std::move(value)); }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<Cell>> cells_;
};

inline std::string format_number(double x) {
  if (x == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_csv(const ResultTable& t) {
  std::string out;
  for (const auto& [k, v] : t.provenance) out += "# " + k + ": " + v + "\n";
  for (std::size_t c = 0; c < t.column_count(); ++c) out += (c ? "," : "") + t.columns()[c];
  out += "\n";
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    for (std::size_t c = 0; c < t.column_count(); ++c) {
      if (c) out += ",";
      const Cell& cell = t.cell(r, c);
      if (const double* x = std::get_if<double>(&cell)) {
        out += format_number(*x);
      } else {
        const auto& s = std::get<std::string>(cell);
        if (s.find_first_of(",\n\"") != std::string::npos)
          throw InvalidArgument("ResultTable: text cell '" + s + "' needs quoting");
        out += s;
      }
    }
    out += "\n";
  }
  return out;
}

inline std::string to_json(const ResultTable& t) {
  nlohmann::ordered_json j;
  j["columns"] = t.columns();
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < t.column_count(); ++c)
      std::visit([&](const auto& v) { row.push_back(v); }, t.cell(r, c));
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  auto prov = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.provenance) prov[k] = v;
  j["provenance"] = std::move(prov);
  return j.dump(2) + "\n";
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return x;
}

inline ResultTable parse_csv(const std::string& text) {
  ResultTable t;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> cols;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') throw ParseError("parse_csv: CRLF line ending");
    if (line.rfind("# ", 0) == 0 && header.empty()) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) throw ParseError("parse_csv: malformed provenance line");
      t.note(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    if (header.empty()) {
      header = split(line);
      cols.resize(header.size());
      continue;
    }
    auto cells = split(line);
    if (cells.size() != header.size()) throw ParseError("parse_csv: ragged row");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (auto x = parse_number(cells[c])) cols[c].emplace_back(*x);
      else cols[c].emplace_back(cells[c]);
    }
  }
  for (std::size_t c = 0; c < header.size(); ++c) t.add_column(header[c], std::move(cols[c]));
  return t;
}

inline std::string serialize(const ResultTable& t, const std::string& format) {
  if (format == "json") return to_json(t);
  if (format == "csv") return to_csv(t);
  throw InvalidArgument("unknown output format '" + format + "'");
}

// Writes to `path`, or standard output when the path is empty.
inline void emit(const ResultTable& t, const std::string& format, const std::string& path) {
  const std::string body = serialize(t, format);
  if (path.empty()) {
    std::cout << body << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw IoError("write to '" + path + "' failed");
}

}  // namespace nhq::cli
