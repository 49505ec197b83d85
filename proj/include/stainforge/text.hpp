#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "stainforge/error.hpp"

namespace stainforge::text {

/// 17 significant digits, locale independent; parses back bit-exactly.
inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> try_parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline double parse_real(std::string_view s, std::string_view what) {
  if (auto v = try_parse_real(s)) return *v;
  throw Error(ErrorCode::ParseError, std::string(what) + ": not a number: '" + std::string(s) + "'");
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::ParseError,
                std::string(what) + ": not an unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

/// Splits "key = value"; returns nullopt for blank lines and '#' comments.
inline std::optional<std::pair<std::string, std::string>> split_key_value(std::string_view line,
                                                                           std::size_t line_no) {
  const auto t = trim(line);
  if (t.empty() || t.front() == '#') return std::nullopt;
  const auto eq = t.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": expected key=value, got '" + std::string(t) + "'");
  }
  return std::pair{std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1)))};
}

}  // namespace stainforge::text
