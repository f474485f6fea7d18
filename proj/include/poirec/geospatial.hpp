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

#ifndef POIREC_GEOSPATIAL_HPP_
#define POIREC_GEOSPATIAL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "poirec/domain.hpp"

namespace poirec {

inline constexpr int kDefaultCellResolution = 8;

// Hexagonal cell identifier rendered as 15 lowercase hex digits
// (e.g. "882f5a3751fffff").
class CellId {
 public:
  explicit CellId(std::uint64_t bits);

  // Parses the 15-digit rendering. Throws ValidationError.
  static CellId parse(std::string_view text);

  std::uint64_t bits() const { return bits_; }
  int resolution() const;
  int base_cell() const;
  std::string str() const;

  friend bool operator==(const CellId&, const CellId&) = default;

 private:
  std::uint64_t bits_;
};

struct CellOptions {
  int resolution = kDefaultCellResolution;
  // Resolutions other than 8 are refused unless this is set.
  bool allow_any_resolution = false;
};

// Containing cell of `point` in the icosahedral aperture-7 hexagonal grid.
CellId h3_cell(const GeoPoint& point, const CellOptions& options = {});

// Same, from raw degrees; throws ValidationError for out-of-range input.
CellId h3_cell(double lat_deg, double lon_deg, const CellOptions& options = {});

using PostalTable = std::map<std::string, std::string>;

// Strips an optional hyphen; returns the 7-digit key or an empty string when
// the input does not match ^\d{3}-?\d{4}$.
std::string normalize_postal_code(std::string_view code);

// Throws LookupMiss for unknown or malformed codes.
std::string municipality_of(std::string_view postal_code,
                            const PostalTable& table);

// municipality + " " + cell. The result is an opaque attribute value.
std::string geokey(std::string_view municipality, const CellId& cell);

}  // namespace poirec

#endif  // POIREC_GEOSPATIAL_HPP_
