#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlweaving/error.hpp"
#include "mlweaving/quantize.hpp"

namespace mlweaving {

enum class DatasetFormat { kLibsvm, kCsv };

inline DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "libsvm") return DatasetFormat::kLibsvm;
  if (name == "csv") return DatasetFormat::kCsv;
  throw InvalidArgument("unknown dataset format '" + name + "'");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> to_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline double number_or_throw(std::string_view s, std::size_t line, const char* what) {
  auto v = to_number(s);
  if (!v) throw ParseError(line, std::string("non-numeric ") + what + " '" + std::string(s) + "'");
  return *v;
}

}  // namespace detail

// Sparse text format: "label idx:val idx:val ...", indices 1-based. Missing
// entries are 0. M is the largest index seen unless `declared_features` is set.
inline RawMatrix parse_libsvm(std::istream& in, std::optional<std::size_t> declared_features = std::nullopt) {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;

    std::istringstream tokens{std::string(view)};
    std::string tok;
    tokens >> tok;
    labels.push_back(detail::number_or_throw(tok, lineno, "label"));
    auto& row = rows.emplace_back();
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected idx:val, got '" + tok + "'");
      std::size_t idx = 0;
      const std::string_view idx_text(tok.data(), colon);
      const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size())
        throw ParseError(lineno, "bad feature index '" + std::string(idx_text) + "'");
      if (idx == 0) throw ParseError(lineno, "feature indices are 1-based; got 0");
      if (declared_features && idx > *declared_features)
        throw ParseError(lineno, "feature index " + std::to_string(idx) + " exceeds declared feature count");
      const double v = detail::number_or_throw(std::string_view(tok).substr(colon + 1), lineno, "value");
      for (const auto& [seen, _] : row)
        if (seen == idx - 1) throw ParseError(lineno, "duplicate feature index " + std::to_string(idx));
      row.emplace_back(idx - 1, v);
      max_index = std::max(max_index, idx);
    }
  }
  if (rows.empty()) throw ParseError(lineno, "dataset contains no samples");

  RawMatrix raw;
  raw.rows = rows.size();
  raw.cols = declared_features ? *declared_features : max_index;
  if (raw.cols == 0) throw ParseError(lineno, "dataset has no features");
  raw.values.assign(raw.rows * raw.cols, 0.0);
  raw.labels = std::move(labels);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& [m, v] : rows[i]) raw.values[i * raw.cols + m] = v;
  return raw;
}

// Dense comma-separated rows, label first. A first line made entirely of
// non-numeric fields is treated as a header.
inline RawMatrix parse_csv(std::istream& in) {
  RawMatrix raw;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  bool first = true;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = view.find(',', pos);
      fields.push_back(view.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (first) {
      first = false;
      bool all_text = true;
      for (auto f : fields) all_text = all_text && !detail::to_number(f);
      if (all_text) {
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw ParseError(lineno, "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    if (width < 2) throw ParseError(lineno, "csv rows need a label and at least one feature");
    raw.labels.push_back(detail::number_or_throw(fields[0], lineno, "label"));
    for (std::size_t k = 1; k < fields.size(); ++k) raw.values.push_back(detail::number_or_throw(fields[k], lineno, "field"));
  }
  if (raw.labels.empty()) throw ParseError(lineno, "dataset contains no samples");
  raw.rows = raw.labels.size();
  raw.cols = width - 1;
  return raw;
}

inline RawMatrix ingest(std::istream& in, DatasetFormat format, std::optional<std::size_t> declared_features = std::nullopt) {
  return format == DatasetFormat::kLibsvm ? parse_libsvm(in, declared_features) : parse_csv(in);
}

inline RawMatrix ingest(const std::string& path, DatasetFormat format, std::optional<std::size_t> declared_features = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  return ingest(in, format, declared_features);
}

inline void write_libsvm(std::ostream& out, const RawMatrix& raw) {
  out.precision(17);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    out << raw.labels[i];
    for (std::size_t m = 0; m < raw.cols; ++m)
      if (raw.at(i, m) != 0.0) out << ' ' << (m + 1) << ':' << raw.at(i, m);
    out << '\n';
  }
}

}  // namespace mlweaving
