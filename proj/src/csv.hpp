#pragma once

// Small CSV field helpers shared by the text parsers.

#include "colorweak/types.hpp"

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

namespace colorweak::csv {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

inline double to_double(const std::string& s, std::size_t line, const char* field) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty() || !std::isfinite(v))
    throw ParseError(std::string("invalid number for ") + field + ": '" + t + "'", line);
  return v;
}

inline int to_int(const std::string& s, std::size_t line, const char* field) {
  const std::string t = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ParseError(std::string("invalid integer for ") + field + ": '" + t + "'", line);
  return v;
}

}  // namespace colorweak::csv
