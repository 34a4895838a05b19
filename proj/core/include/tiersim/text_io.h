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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tiersim {

// One data row of a comma (or tab) delimited file.
struct DelimitedRow {
  std::string source;
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;

  std::string where() const;
  double number(std::size_t col) const;
  int64_t integer(std::size_t col) const;
};

// Reads rows with exactly `columns` fields. Blank lines and lines starting
// with '#' are skipped; a first row that is not numeric is taken as a
// header. Throws ParseError on a missing file, a wrong field count, or a
// file without data rows.
std::vector<DelimitedRow> read_delimited(const std::filesystem::path& path,
                                         std::size_t columns);

// Shortest text that round-trips the value exactly.
std::string format_double(double v);

double parse_double(std::string_view text, const std::string& where);
int64_t parse_int(std::string_view text, const std::string& where);

// 64-bit FNV-1a, stable across platforms.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace tiersim
