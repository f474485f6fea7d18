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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "h3_tables.hpp"
#include "poirec/error.hpp"

namespace poirec {

namespace {

// Bit layout of a cell index: mode (4 bits at 59), resolution (4 bits at 52),
// base cell (7 bits at 45), then fifteen 3-bit digits, finest last.
constexpr int kModeOffset = 59;
constexpr int kResOffset = 52;
constexpr int kBaseCellOffset = 45;
constexpr int kMaxResolution = 15;
constexpr int kDigitBits = 3;
constexpr std::uint64_t kDigitMask = 7;
constexpr std::uint64_t kInitBits = 0x00001fffffffffffULL;  // all digits 7
constexpr std::uint64_t kCellMode = 1;
constexpr int kNumBaseCells = 122;

constexpr double kEpsilon = 1e-16;
constexpr double kInvRes0UGnomonic = 2.61803398874989588842;
constexpr double kSqrt7 = 2.6457513110645905905016157536392604257102;
constexpr double kAp7RotRads = 0.333473172251832115336090755351601070065900389;
constexpr double kSin60Inv = 1.1547005383792515;

enum Digit : int {
  kCenter = 0,
  kK = 1,
  kJ = 2,
  kJK = 3,
  kI = 4,
  kIK = 5,
  kIJ = 6,
};

struct Ijk {
  int i = 0;
  int j = 0;
  int k = 0;

  Ijk& normalize() {
    const int lo = std::min({i, j, k});
    i -= lo;
    j -= lo;
    k -= lo;
    return *this;
  }

  friend Ijk operator+(Ijk a, Ijk b) { return {a.i + b.i, a.j + b.j, a.k + b.k}; }
  friend Ijk operator-(Ijk a, Ijk b) { return {a.i - b.i, a.j - b.j, a.k - b.k}; }
  friend Ijk operator*(Ijk a, int s) { return {a.i * s, a.j * s, a.k * s}; }
  friend bool operator==(const Ijk&, const Ijk&) = default;
};

bool is_class_iii(int res) { return res % 2 == 1; }

// Parent in the aperture-7 grid; ccw for Class III children.
Ijk up_aperture7(Ijk c, bool ccw) {
  const int i = c.i - c.k;
  const int j = c.j - c.k;
  Ijk out;
  if (ccw) {
    out.i = static_cast<int>(std::lround((3 * i - j) / 7.0));
    out.j = static_cast<int>(std::lround((i + 2 * j) / 7.0));
  } else {
    out.i = static_cast<int>(std::lround((2 * i + j) / 7.0));
    out.j = static_cast<int>(std::lround((3 * j - i) / 7.0));
  }
  return out.normalize();
}

Ijk down_aperture7(Ijk c, bool ccw) {
  const Ijk iv = ccw ? Ijk{3, 0, 1} : Ijk{3, 1, 0};
  const Ijk jv = ccw ? Ijk{1, 3, 0} : Ijk{0, 3, 1};
  const Ijk kv = ccw ? Ijk{0, 1, 3} : Ijk{1, 0, 3};
  Ijk out = iv * c.i + jv * c.j + kv * c.k;
  return out.normalize();
}

int unit_ijk_to_digit(Ijk c) {
  c.normalize();
  static constexpr Ijk kUnit[7] = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1},
                                   {1, 0, 0}, {1, 0, 1}, {1, 1, 0}};
  for (int d = 0; d < 7; ++d) {
    if (kUnit[d] == c) return d;
  }
  return 7;
}

int rotate_digit_ccw(int d) {
  switch (d) {
    case kK: return kIK;
    case kIK: return kI;
    case kI: return kIJ;
    case kIJ: return kJ;
    case kJ: return kJK;
    case kJK: return kK;
    default: return d;
  }
}

int rotate_digit_cw(int d) {
  switch (d) {
    case kK: return kJK;
    case kJK: return kJ;
    case kJ: return kIJ;
    case kIJ: return kI;
    case kI: return kIK;
    case kIK: return kK;
    default: return d;
  }
}

int digit_offset(int res) { return (kMaxResolution - res) * kDigitBits; }

int get_digit(std::uint64_t h, int res) {
  return static_cast<int>((h >> digit_offset(res)) & kDigitMask);
}

std::uint64_t set_digit(std::uint64_t h, int res, int digit) {
  const int off = digit_offset(res);
  return (h & ~(kDigitMask << off)) |
         (static_cast<std::uint64_t>(digit) << off);
}

int leading_nonzero_digit(std::uint64_t h, int res) {
  for (int r = 1; r <= res; ++r) {
    if (const int d = get_digit(h, r); d != kCenter) return d;
  }
  return kCenter;
}

std::uint64_t rotate60(std::uint64_t h, int res, bool ccw) {
  for (int r = 1; r <= res; ++r) {
    const int d = get_digit(h, r);
    h = set_digit(h, r, ccw ? rotate_digit_ccw(d) : rotate_digit_cw(d));
  }
  return h;
}

// Pentagon rotation skips the deleted k-axis subsequence.
std::uint64_t rotate_pentagon60_ccw(std::uint64_t h, int res) {
  bool found_first = false;
  for (int r = 1; r <= res; ++r) {
    h = set_digit(h, r, rotate_digit_ccw(get_digit(h, r)));
    if (!found_first && get_digit(h, r) != kCenter) {
      found_first = true;
      if (leading_nonzero_digit(h, res) == kK) h = rotate60(h, res, true);
    }
  }
  return h;
}

bool is_pentagon(int base_cell) {
  const auto& p = h3tables::kPentagonBaseCells;
  return std::find(p.begin(), p.end(), base_cell) != p.end();
}

bool is_cw_offset(int base_cell, int face) {
  const auto& off = h3tables::kCwOffsetFaces[static_cast<std::size_t>(base_cell)];
  return off.face_a == face || off.face_b == face;
}

struct Vec3 {
  double x, y, z;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 normalized() const {
    const double n = std::sqrt(dot(*this));
    return n > 0.0 ? *this * (1.0 / n) : Vec3{0.0, 0.0, 0.0};
  }
};

Vec3 face_center(int face) {
  const auto& c = h3tables::kFaceCenterPoint[static_cast<std::size_t>(face)];
  return {c.x, c.y, c.z};
}

// Azimuth of `p` seen from `center`, clockwise from north, in radians.
double azimuth(const Vec3& center, const Vec3& p) {
  const Vec3 north_pole{0.0, 0.0, 1.0};
  const Vec3 north = (north_pole - center * north_pole.dot(center)).normalized();
  const Vec3 east = north.cross(center);
  const Vec3 proj = (p - center * p.dot(center)).normalized();
  return std::atan2(proj.dot(east), proj.dot(north));
}

// Quantizes planar hex coordinates to the containing hex (DGGRID method).
Ijk hex2d_to_ijk(double x, double y) {
  const double a1 = std::abs(x);
  const double a2 = std::abs(y);
  const double x2 = a2 * kSin60Inv;
  const double x1 = a1 + x2 / 2.0;
  const int m1 = static_cast<int>(x1);
  const int m2 = static_cast<int>(x2);
  const double r1 = x1 - m1;
  const double r2 = x2 - m2;

  Ijk h;
  if (r1 < 0.5) {
    if (r1 < 1.0 / 3.0) {
      h.i = m1;
      h.j = r2 < (1.0 + r1) / 2.0 ? m2 : m2 + 1;
    } else {
      h.i = ((1.0 - r1) <= r2 && r2 < (2.0 * r1)) ? m1 + 1 : m1;
      h.j = r2 < (1.0 - r1) ? m2 : m2 + 1;
    }
  } else {
    if (r1 < 2.0 / 3.0) {
      h.j = r2 < (1.0 - r1) ? m2 : m2 + 1;
      h.i = ((2.0 * r1 - 1.0) < r2 && r2 < (1.0 - r1)) ? m1 : m1 + 1;
    } else {
      h.i = m1 + 1;
      h.j = r2 < (r1 / 2.0) ? m2 : m2 + 1;
    }
  }

  // Fold across the axes if necessary.
  if (x < 0.0) {
    if (h.j % 2 == 0) {
      const int axis_i = h.j / 2;
      h.i = h.i - 2 * (h.i - axis_i);
    } else {
      const int axis_i = (h.j + 1) / 2;
      h.i = h.i - (2 * (h.i - axis_i) + 1);
    }
  }
  if (y < 0.0) {
    h.i = h.i - (2 * h.j + 1) / 2;
    h.j = -h.j;
  }
  return h.normalize();
}

struct FaceIjk {
  int face = 0;
  Ijk coord;
};

FaceIjk point_to_face_ijk(double lat_rad, double lon_rad, int res) {
  const Vec3 p{std::cos(lat_rad) * std::cos(lon_rad),
               std::cos(lat_rad) * std::sin(lon_rad), std::sin(lat_rad)};
  int face = 0;
  double sqd = 5.0;
  for (int f = 0; f < 20; ++f) {
    const Vec3 d = p - face_center(f);
    const double dist = d.dot(d);
    if (dist < sqd) {
      face = f;
      sqd = dist;
    }
  }

  // cos(r) = 1 - 2 sin^2(r/2) = 1 - sqd/2
  double r = std::acos(1.0 - sqd / 2.0);
  if (r < kEpsilon) return {face, {0, 0, 0}};

  double theta =
      h3tables::kFaceAxisAzimuthCII[static_cast<std::size_t>(face)] -
      azimuth(face_center(face), p);
  if (is_class_iii(res)) theta -= kAp7RotRads;

  // Gnomonic scaling, then scale to the resolution's unit length.
  r = std::tan(r) * kInvRes0UGnomonic;
  for (int i = 0; i < res; ++i) r *= kSqrt7;

  return {face, hex2d_to_ijk(r * std::cos(theta), r * std::sin(theta))};
}

std::uint64_t face_ijk_to_cell(FaceIjk fijk, int res) {
  std::uint64_t h = kInitBits | (kCellMode << kModeOffset) |
                    (static_cast<std::uint64_t>(res) << kResOffset);

  Ijk ijk = fijk.coord;
  for (int r = res; r >= 1; --r) {
    const Ijk last = ijk;
    const bool ccw = is_class_iii(r);
    ijk = up_aperture7(ijk, ccw);
    const Ijk center = down_aperture7(ijk, ccw);
    h = set_digit(h, r, unit_ijk_to_digit(last - center));
  }

  if (ijk.i < 0 || ijk.i > 2 || ijk.j < 0 || ijk.j > 2 || ijk.k < 0 ||
      ijk.k > 2) {
    throw ValidationError("cell computation left the base-cell lattice");
  }
  const auto& rot = h3tables::kFaceIjkBaseCells[fijk.face][ijk.i][ijk.j][ijk.k];
  const int base_cell = rot.base_cell;
  h |= static_cast<std::uint64_t>(base_cell) << kBaseCellOffset;

  if (is_pentagon(base_cell)) {
    if (leading_nonzero_digit(h, res) == kK) {
      h = rotate60(h, res, !is_cw_offset(base_cell, fijk.face));
    }
    for (int i = 0; i < rot.ccw_rotations; ++i) h = rotate_pentagon60_ccw(h, res);
  } else {
    for (int i = 0; i < rot.ccw_rotations; ++i) h = rotate60(h, res, true);
  }
  return h;
}

}  // namespace

CellId::CellId(std::uint64_t bits) : bits_(bits) {
  const auto mode = (bits >> kModeOffset) & 0xF;
  const int res = static_cast<int>((bits >> kResOffset) & 0xF);
  const int bc = static_cast<int>((bits >> kBaseCellOffset) & 0x7F);
  if (mode != kCellMode || bc >= kNumBaseCells || (bits >> 63) != 0) {
    throw ValidationError("not a cell index");
  }
  for (int r = res + 1; r <= kMaxResolution; ++r) {
    if (get_digit(bits, r) != 7) throw ValidationError("not a cell index");
  }
}

CellId CellId::parse(std::string_view text) {
  if (text.size() != 15 ||
      !std::all_of(text.begin(), text.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
      })) {
    throw ValidationError("malformed cell id '" + std::string(text) + "'");
  }
  std::uint64_t bits = 0;
  std::from_chars(text.data(), text.data() + text.size(), bits, 16);
  return CellId(bits);
}

int CellId::resolution() const {
  return static_cast<int>((bits_ >> kResOffset) & 0xF);
}

int CellId::base_cell() const {
  return static_cast<int>((bits_ >> kBaseCellOffset) & 0x7F);
}

std::string CellId::str() const {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), bits_, 16);
  return std::string(buf, end);
}

CellId h3_cell(double lat_deg, double lon_deg, const CellOptions& options) {
  return h3_cell(GeoPoint(lat_deg, lon_deg), options);
}

CellId h3_cell(const GeoPoint& point, const CellOptions& options) {
  const int res = options.resolution;
  if (res < 0 || res > kMaxResolution) {
    throw ConfigError("cell resolution must be in [0, 15]");
  }
  if (res != kDefaultCellResolution && !options.allow_any_resolution) {
    throw ConfigError("cell resolution " + std::to_string(res) +
                      " is disabled (only 8 is enabled by default)");
  }
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  const FaceIjk fijk =
      point_to_face_ijk(point.lat() * kDegToRad, point.lon() * kDegToRad, res);
  return CellId(face_ijk_to_cell(fijk, res));
}

std::string normalize_postal_code(std::string_view code) {
  std::string digits;
  for (std::size_t i = 0; i < code.size(); ++i) {
    const char c = code[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
    } else if (c == '-' && i == 3 && digits.size() == 3) {
      continue;
    } else {
      return {};
    }
  }
  return digits.size() == 7 ? digits : std::string{};
}

std::string municipality_of(std::string_view postal_code,
                            const PostalTable& table) {
  const std::string key = normalize_postal_code(postal_code);
  auto it = key.empty() ? table.end() : table.find(key);
  if (it == table.end()) {
    throw LookupMiss("postal code not found: " + std::string(postal_code));
  }
  return it->second;
}

std::string geokey(std::string_view municipality, const CellId& cell) {
  std::string out(municipality);
  out.push_back(' ');
  out += cell.str();
  return out;
}

}  // namespace poirec
