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
#include <charconv>
#include <chrono>
#include <cstdio>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "poirec/error.hpp"
#include "poirec/ingest.hpp"

namespace poirec {

namespace {

constexpr std::string_view kWeekdays[] = {"Sun", "Mon", "Tue", "Wed",
                                          "Thu", "Fri", "Sat"};
constexpr std::string_view kMonths[] = {"Jan", "Feb", "Mar", "Apr",
                                        "May", "Jun", "Jul", "Aug",
                                        "Sep", "Oct", "Nov", "Dec"};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<Timestamp> make_timestamp(int y, int mo, int d, int h, int mi,
                                        int s, int offset_min) {
  using namespace std::chrono;
  if (y < 1970 || y >= 2100) return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
    return std::nullopt;
  }
  const auto t = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} -
                 minutes{offset_min};
  if (t < sys_days{year{1970} / 1 / 1} || t >= sys_days{year{2100} / 1 / 1}) {
    return std::nullopt;
  }
  return time_point_cast<seconds>(t);
}

bool parse_clock(std::string_view s, int& h, int& mi, int& sec) {
  const auto parts = split(s, ':');
  return parts.size() == 3 && parts[0].size() == 2 && parts[1].size() == 2 &&
         parts[2].size() == 2 && parse_number(parts[0], h) &&
         parse_number(parts[1], mi) && parse_number(parts[2], sec);
}

// "+0900", "-0500", "+09:00", "Z"
bool parse_zone(std::string_view z, int& offset_min) {
  if (z == "Z") {
    offset_min = 0;
    return true;
  }
  if (z.size() < 5 || (z[0] != '+' && z[0] != '-')) return false;
  std::string digits;
  for (char c : z.substr(1)) {
    if (c != ':') digits.push_back(c);
  }
  int hh = 0, mm = 0;
  if (digits.size() != 4 || !parse_number(std::string_view(digits).substr(0, 2), hh) ||
      !parse_number(std::string_view(digits).substr(2, 2), mm) || mm > 59) {
    return false;
  }
  offset_min = (z[0] == '-' ? -1 : 1) * (hh * 60 + mm);
  return true;
}

std::optional<Timestamp> parse_foursquare(std::string_view text) {
  const auto f = split(text, ' ');
  if (f.size() != 6) return std::nullopt;
  if (std::find(std::begin(kWeekdays), std::end(kWeekdays), f[0]) ==
      std::end(kWeekdays)) {
    return std::nullopt;
  }
  const auto m = std::find(std::begin(kMonths), std::end(kMonths), f[1]);
  if (m == std::end(kMonths)) return std::nullopt;
  int d = 0, h = 0, mi = 0, s = 0, y = 0, off = 0;
  if (f[2].size() != 2 || !parse_number(f[2], d) || !parse_clock(f[3], h, mi, s) ||
      !parse_zone(f[4], off) || f[5].size() != 4 || !parse_number(f[5], y)) {
    return std::nullopt;
  }
  return make_timestamp(y, static_cast<int>(m - std::begin(kMonths)) + 1, d, h,
                        mi, s, off);
}

std::optional<Timestamp> parse_iso(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS followed by Z or +HH:MM / +HHMM.
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ')) {
    return std::nullopt;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, off = 0;
  if (!parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), mo) ||
      !parse_number(text.substr(8, 2), d) ||
      !parse_clock(text.substr(11, 8), h, mi, s) ||
      !parse_zone(text.substr(19), off)) {
    return std::nullopt;
  }
  return make_timestamp(y, mo, d, h, mi, s, off);
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text,
                                         bool iso_fallback) {
  if (auto t = parse_foursquare(text)) return t;
  if (iso_fallback) return parse_iso(text);
  return std::nullopt;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(t);
  const year_month_day ymd{days};
  const hh_mm_ss<seconds> tod{t - days};
  const weekday wd{days};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s %s %02u %02lld:%02lld:%02lld +0000 %04d",
                kWeekdays[wd.c_encoding()].data(),
                kMonths[static_cast<unsigned>(ymd.month()) - 1].data(),
                static_cast<unsigned>(ymd.day()),
                static_cast<long long>(tod.hours().count()),
                static_cast<long long>(tod.minutes().count()),
                static_cast<long long>(tod.seconds().count()),
                static_cast<int>(ymd.year()));
  return buf;
}

CheckInParseResult parse_checkins(std::istream& in,
                                  const CheckInParseOptions& options) {
  CheckInParseResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string reason;
    const auto f = split(line, '\t');
    CheckIn c;
    double lat = 0.0, lon = 0.0;
    if (f.size() != 8) {
      reason = "expected 8 tab-separated fields, got " + std::to_string(f.size());
    } else if (f[0].empty() || f[1].empty()) {
      reason = "empty user or venue id";
    } else if (!parse_number(f[4], lat) || !parse_number(f[5], lon)) {
      reason = "unparseable coordinates";
    } else if (!GeoPoint::valid(lat, lon)) {
      reason = "coordinates out of range";
    } else if (!parse_number(f[6], c.tz_offset_min)) {
      reason = "unparseable timezone offset";
    } else if (auto t = parse_timestamp(f[7], options.iso_fallback); !t) {
      reason = "unparseable timestamp '" + std::string(f[7]) + "'";
    } else {
      c.user_id = f[0];
      c.venue_id = f[1];
      c.category_id = f[2];
      c.category_name = f[3];
      c.geo = GeoPoint(lat, lon);
      c.timestamp_utc = *t;
      result.checkins.push_back(std::move(c));
      continue;
    }

    if (options.policy == LinePolicy::kAbort) throw ParseError(reason, lineno);
    result.malformed.push_back({lineno, std::move(reason)});
  }
  return result;
}

void serialize_checkins(const std::vector<CheckIn>& checkins, std::ostream& out) {
  for (const auto& c : checkins) {
    out << c.user_id << '\t' << c.venue_id << '\t' << c.category_id << '\t'
        << c.category_name << '\t' << format_double(c.geo.lat()) << '\t'
        << format_double(c.geo.lon()) << '\t' << c.tz_offset_min << '\t'
        << format_timestamp(c.timestamp_utc) << '\n';
  }
}

CategoryAllowlist::CategoryAllowlist(std::vector<std::string> names) {
  for (auto& n : names) {
    if (!names_.insert(std::move(n)).second) {
      throw ConfigError("duplicate category in allowlist");
    }
  }
}

CategoryAllowlist CategoryAllowlist::load(std::istream& in) {
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    names.push_back(line);
  }
  if (names.empty()) throw ConfigError("category allowlist is empty");
  return CategoryAllowlist(std::move(names));
}

CategoryAllowlist CategoryAllowlist::food_categories() {
  // Listed in descending order of check-in frequency in the Tokyo data.
  // Category names are verbatim, including the double space in
  // "Ramen /  Noodle House".
  return CategoryAllowlist({
      "Ramen /  Noodle House",
      "Japanese Restaurant",
      "Food & Drink Shop",
      "Coffee Shop",
      "Café",
      "Fast Food Restaurant",
      "Bar",
      "Chinese Restaurant",
      "Italian Restaurant",
      "Restaurant",
      "Indian Restaurant",
      "Diner",
      "BBQ Joint",
      "Sushi Restaurant",
      "Burger Joint",
      "Bakery",
      "Deli / Bodega",
      "Asian Restaurant",
      "Dessert Shop",
      "Dumpling Restaurant",
      "Steakhouse",
      "Korean Restaurant",
      "Sandwich Place",
      "Donut Shop",
      "Pizza Place",
      "French Restaurant",
      "Thai Restaurant",
      "American Restaurant",
      "Fried Chicken Joint",
      "Seafood Restaurant",
      "Candy Store",
      "Beer Garden",
      "Food",
      "Tea Room",
      "Soup Place",
      "Ice Cream Shop",
      "Spanish Restaurant",
      "Snack Place",
      "Mexican Restaurant",
      "German Restaurant",
      "Food Truck",
      "Gastropub",
      "Hot Dog Joint",
      "Vietnamese Restaurant",
      "Vegetarian / Vegan Restaurant",
      "Breakfast Spot",
      "Dim Sum Restaurant",
      "Brazilian Restaurant",
      "Middle Eastern Restaurant",
      "Caribbean Restaurant",
      "Tapas Restaurant",
      "Cupcake Shop",
      "Mediterranean Restaurant",
      "Bagel Shop",
      "Australian Restaurant",
      "Eastern European Restaurant",
      "Turkish Restaurant",
      "Salad Place",
      "Cajun / Creole Restaurant",
      "Scandinavian Restaurant",
      "Taco Place",
      "Fish & Chips Shop",
      "Malaysian Restaurant",
      "Latin American Restaurant",
      "Portuguese Restaurant",
      "South American Restaurant",
      "African Restaurant",
      "Burrito Place",
      "Cuban Restaurant",
      "Peruvian Restaurant",
      "Ethiopian Restaurant",
      "Moroccan Restaurant",
      "Mac & Cheese Joint",
      "Swiss Restaurant",
      "Argentinian Restaurant",
      "Falafel Restaurant",
      "Gluten-free Restaurant",
      "Arepa Restaurant",
      "Southern / Soul Food Restaurant",
      "Afghan Restaurant",
  });
}

bool CategoryAllowlist::contains(std::string_view name) const {
  return names_.find(name) != names_.end();
}

std::vector<CheckIn> filter_by_category(const std::vector<CheckIn>& checkins,
                                        const CategoryAllowlist& allowlist) {
  std::vector<CheckIn> out;
  std::copy_if(checkins.begin(), checkins.end(), std::back_inserter(out),
               [&](const CheckIn& c) { return allowlist.contains(c.category_name); });
  return out;
}

std::vector<CheckIn> filter_loyal_users(const std::vector<CheckIn>& checkins,
                                        std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& c : checkins) ++counts[c.user_id];
  std::vector<CheckIn> out;
  std::copy_if(checkins.begin(), checkins.end(), std::back_inserter(out),
               [&](const CheckIn& c) { return counts[c.user_id] >= min_count; });
  return out;
}

}  // namespace poirec
