#pragma once

// Plain-text files: samples (one integer rank per line) and policies
// (first line M, then t_0..t_M one per line).

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "drorecode/distributions.hpp"
#include "drorecode/error.hpp"
#include "drorecode/saa.hpp"

namespace drorecode {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string where(const std::string& source, int line) {
  return source + ":" + std::to_string(line);
}

}  // namespace detail

/// Blank lines and lines starting with '#' are skipped.
inline RankSamples read_samples(std::istream& in, int batch_size, const std::string& source = "<samples>") {
  std::vector<int> ranks;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ParseError(detail::where(source, lineno) + ": expected an integer rank, got '" + std::string(s) + "'");
    if (value < 0 || value > batch_size)
      throw ParseError(detail::where(source, lineno) + ": rank " + std::to_string(value) + " outside [0, " +
                       std::to_string(batch_size) + "]");
    ranks.push_back(value);
  }
  if (ranks.empty()) throw ParseError(source + ": no samples");
  return RankSamples(std::move(ranks), batch_size);
}

inline RankSamples read_samples_file(const std::string& path, int batch_size) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open samples file '" + path + "'");
  return read_samples(in, batch_size, path);
}

inline void write_policy(std::ostream& os, const RecodingVector& t) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << t.max_rank() << '\n';
  for (double v : t.values()) os << v << '\n';
  os.precision(old_precision);
}

inline RecodingVector read_policy(std::istream& in, const std::string& source = "<policy>") {
  std::string line;
  int lineno = 0;
  auto next = [&]() -> std::string_view {
    while (std::getline(in, line)) {
      ++lineno;
      const auto s = detail::trim(line);
      if (!s.empty()) return s;
    }
    return {};
  };
  const auto head = next();
  int m = -1;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), m);
  if (head.empty() || ec != std::errc() || ptr != head.data() + head.size() || m < 0)
    throw ParseError(source + ": first line must be the batch size M");
  std::vector<double> t;
  for (int r = 0; r <= m; ++r) {
    const auto s = next();
    if (s.empty()) throw ParseError(source + ": expected " + std::to_string(m + 1) + " values, got " + std::to_string(r));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(std::string(s), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || !std::isfinite(v) || v < 0.0)
      throw ParseError(detail::where(source, lineno) + ": expected a nonnegative number, got '" + std::string(s) + "'");
    t.push_back(v);
  }
  if (!next().empty()) throw ParseError(source + ": trailing content after " + std::to_string(m + 1) + " values");
  return RecodingVector(std::move(t));
}

inline RecodingVector read_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open policy file '" + path + "'");
  return read_policy(in, path);
}

}  // namespace drorecode
