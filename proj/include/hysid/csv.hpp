#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hysid/dataset.hpp"

namespace hysid {

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::Format, "cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline void write_csv(std::ostream& os, const TimeSeriesDataset& ds) {
  os << "time";
  for (const auto& c : ds.channels()) os << ',' << c.name;
  os << '\n';
  for (std::size_t k = 0; k < ds.length(); ++k) {
    os << format_double(ds.time(k));
    for (const auto& c : ds.channels()) os << ',' << format_double(c.values[k]);
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const TimeSeriesDataset& ds) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_csv(f, ds);
  if (!f) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline TimeSeriesDataset read_csv(std::istream& is, const std::string& label = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Format, label + ": empty file");
  auto header = split_csv_line(line);
  if (header.empty() || header.front() != "time")
    throw Error(ErrorKind::Format, label + ": first column must be 'time'");
  if (header.size() < 2) throw Error(ErrorKind::Format, label + ": no data channels");
  std::vector<double> t;
  std::vector<Channel> channels;
  for (std::size_t i = 1; i < header.size(); ++i) channels.push_back({header[i], {}});
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::Format, label + ":" + std::to_string(lineno) + ": wrong number of fields");
    t.push_back(parse_double(cells[0]));
    for (std::size_t i = 1; i < cells.size(); ++i) {
      double v = parse_double(cells[i]);
      if (std::isnan(v)) {
        Error e(ErrorKind::InvalidSample, label + ":" + std::to_string(lineno) + ": NaN in channel " + header[i]);
        e.channel = header[i];
        e.row = static_cast<std::ptrdiff_t>(t.size() - 1);
        throw e;
      }
      channels[i - 1].values.push_back(v);
    }
  }
  if (t.size() < 2) throw Error(ErrorKind::Format, label + ": need at least 2 rows");
  const double period = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(period > 0.0)) throw Error(ErrorKind::Format, label + ": time must be strictly increasing");
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double dt = t[k] - t[k - 1];
    if (!(dt > 0.0) || std::abs(dt - period) > 1e-9 * period)
      throw Error(ErrorKind::Format, label + ": non-uniform sampling at row " + std::to_string(k + 1));
  }
  return TimeSeriesDataset(period, std::move(channels), {}, t.front());
}

inline TimeSeriesDataset read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return read_csv(f, path);
}

}  // namespace hysid
