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

#include "poirec/geospatial.hpp"

#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "poirec/error.hpp"

namespace poirec {
namespace {

struct Vector {
  double lat;
  double lon;
  int res;
  std::string cell;
};

// Vectors were produced once with the reference H3 implementation (h3-js
// 4.5.0): worldwide random points at mixed resolutions, Tokyo points, and
// points around every pentagon at resolutions 8 and 9.
std::vector<Vector> load_vectors() {
  std::ifstream in(std::string(POIREC_TEST_DATA_DIR) + "/h3_vectors.txt");
  REQUIRE(in.good());
  std::vector<Vector> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    Vector v;
    ss >> v.lat >> v.lon >> v.res >> v.cell;
    out.push_back(v);
  }
  return out;
}

CellOptions any_res(int res) { return {res, true}; }

TEST_CASE("cell of the Shinjuku example coordinate") {
  CHECK(h3_cell(35.6938, 139.7034).str() == "882f5a3751fffff");
  CHECK(h3_cell(35.681236, 139.767125).str() == "882f5a32d9fffff");
}

TEST_CASE("frozen reference vectors") {
  const auto vectors = load_vectors();
  REQUIRE(vectors.size() > 700);
  int mismatches = 0;
  for (const auto& v : vectors) {
    const std::string got = h3_cell(v.lat, v.lon, any_res(v.res)).str();
    if (got != v.cell) {
      ++mismatches;
      MESSAGE(v.lat << " " << v.lon << " res " << v.res << ": " << got
                    << " != " << v.cell);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("resolution other than 8 is refused unless enabled") {
  CHECK_THROWS_AS(h3_cell(35.0, 139.0, CellOptions{9, false}), ConfigError);
  CHECK(h3_cell(35.0, 139.0, any_res(9)).resolution() == 9);
  CHECK(h3_cell(35.0, 139.0).resolution() == 8);
}

TEST_CASE("invalid coordinates raise a range error") {
  CHECK_THROWS_AS(h3_cell(95.0, 0.0), ValidationError);
  CHECK_THROWS_AS(h3_cell(0.0, 181.0), ValidationError);
  CHECK_THROWS_AS(h3_cell(std::nan(""), 0.0), ValidationError);
}

TEST_CASE("locally constant inside a known cell") {
  // Center and boundary of 882f5a3751fffff from the reference implementation.
  const std::pair<double, double> center{35.694664477521144, 139.69907567548918};
  const std::array<std::pair<double, double>, 6> boundary{{
      {35.691968387746265, 139.7036106004083},
      {35.69675572796026, 139.7038956877579},
      {35.699451718990616, 139.69936046583754},
      {35.69736025592396, 139.69454068163122},
      {35.692573169402095, 139.6942562258285},
      {35.68987729224386, 139.69879092271128},
  }};
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    // Random point in a random triangle fan slice, shrunk to 95% of the hex
    // to stay clear of the planar-vs-geodesic edge difference.
    const auto& a = boundary[static_cast<std::size_t>(n % 6)];
    const auto& b = boundary[static_cast<std::size_t>((n + 1) % 6)];
    double s = u(rng), t = u(rng);
    if (s + t > 1.0) {
      s = 1.0 - s;
      t = 1.0 - t;
    }
    const double lat = center.first + 0.95 * (s * (a.first - center.first) +
                                              t * (b.first - center.first));
    const double lon = center.second + 0.95 * (s * (a.second - center.second) +
                                               t * (b.second - center.second));
    CHECK(h3_cell(lat, lon).str() == "882f5a3751fffff");
  }
}

TEST_CASE("points one meter apart well inside a cell share the id") {
  // ~1 m of latitude is 9e-6 degrees.
  const double lat = 35.694664477521144, lon = 139.69907567548918;
  CHECK(h3_cell(lat, lon) == h3_cell(lat + 9e-6, lon));
}

TEST_CASE("cell id parsing") {
  const CellId c = CellId::parse("882f5a3751fffff");
  CHECK(c.resolution() == 8);
  CHECK(c.str() == "882f5a3751fffff");
  CHECK_THROWS_AS(CellId::parse("882F5A3751FFFFF"), ValidationError);
  CHECK_THROWS_AS(CellId::parse("882f5a3751ffff"), ValidationError);
  CHECK_THROWS_AS(CellId::parse("882f5a3751ffffe"), ValidationError);
}

TEST_CASE("postal codes and municipalities") {
  const PostalTable table{{"1600022", "新宿区"}, {"1050011", "港区"}};
  CHECK(municipality_of("160-0022", table) == "新宿区");
  CHECK(municipality_of("1600022", table) == "新宿区");
  CHECK_THROWS_AS(municipality_of("999-9999", table), LookupMiss);
  CHECK_THROWS_AS(municipality_of("16-00022", table), LookupMiss);
  CHECK(normalize_postal_code("160-0022") == "1600022");
  CHECK(normalize_postal_code("16000222").empty());
  CHECK(normalize_postal_code("160 0022").empty());
}

TEST_CASE("geokey rendering") {
  const CellId cell = CellId::parse("882f5a3751fffff");
  CHECK(geokey("新宿区", cell) == "新宿区 882f5a3751fffff");
  CHECK(geokey("港区", cell) == "港区 " + cell.str());

  const std::string key = geokey("港区", cell);
  const auto space = key.find(' ');
  CHECK(key.substr(0, space) == "港区");
  CHECK(CellId::parse(key.substr(space + 1)) == cell);
}

}  // namespace
}  // namespace poirec
