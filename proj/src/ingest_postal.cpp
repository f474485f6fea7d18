// Copyright 2026 The poirec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <istream>

#include "poirec/error.hpp"
#include "poirec/ingest.hpp"

namespace poirec {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back().push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quote", 0);
  return fields;
}

PostalParseResult parse_postal_table(std::istream& in,
                                     const PostalColumns& columns) {
  PostalParseResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const ParseError&) {
      ++result.skipped_rows;
      continue;
    }
    if (fields.size() <= std::max(columns.postal_code, columns.municipality)) {
      ++result.skipped_rows;
      continue;
    }
    const std::string key = normalize_postal_code(fields[columns.postal_code]);
    const std::string& name = fields[columns.municipality];
    if (key.empty() || name.empty()) {
      ++result.skipped_rows;
      continue;
    }
    auto [it, inserted] = result.table.insert_or_assign(key, name);
    if (!inserted) ++result.duplicate_keys;
  }
  return result;
}

}  // namespace poirec
