/* Copyright 2026 The tiersim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "tiersim/text_io.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <boost/algorithm/string.hpp>

#include "tiersim/errors.h"

namespace tiersim {

std::string DelimitedRow::where() const {
  return source + ":" + std::to_string(line);
}

double DelimitedRow::number(std::size_t col) const {
  return parse_double(fields.at(col), where());
}

int64_t DelimitedRow::integer(std::size_t col) const {
  return parse_int(fields.at(col), where());
}

double parse_double(std::string_view text, const std::string& where) {
  std::string_view t = text;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) {
    t.remove_prefix(1);
  }
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) {
    t.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() ||
      !std::isfinite(v)) {
    throw ParseError(where + ": expected a number, got '" + std::string(text) +
                     "'");
  }
  return v;
}

int64_t parse_int(std::string_view text, const std::string& where) {
  std::string_view t = text;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) {
    t.remove_prefix(1);
  }
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) {
    t.remove_suffix(1);
  }
  int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ParseError(where + ": expected an integer, got '" +
                     std::string(text) + "'");
  }
  return v;
}

std::vector<DelimitedRow> read_delimited(const std::filesystem::path& path,
                                         std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<DelimitedRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    boost::algorithm::trim(line);
    if (line.empty() || line.front() == '#') continue;
    DelimitedRow row;
    row.source = path.string();
    row.line = line_no;
    boost::algorithm::split(row.fields, line, boost::is_any_of(",\t"));
    for (auto& f : row.fields) boost::algorithm::trim(f);
    if (first) {
      first = false;
      double probe = 0.0;
      const auto& f0 = row.fields.front();
      const auto res = std::from_chars(f0.data(), f0.data() + f0.size(), probe);
      if (res.ec != std::errc()) continue;  // header
    }
    if (row.fields.size() != columns) {
      throw ParseError(row.where() + ": expected " + std::to_string(columns) +
                       " fields, got " + std::to_string(row.fields.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace tiersim
