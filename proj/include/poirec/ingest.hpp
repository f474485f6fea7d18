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

#ifndef POIREC_INGEST_HPP_
#define POIREC_INGEST_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poirec/domain.hpp"
#include "poirec/geospatial.hpp"

namespace poirec {

// ---------------------------------------------------------------------------
// Check-in files
//
// UTF-8, LF-terminated, 8 tab-separated fields:
//   user_id  venue_id  category_id  category_name  latitude  longitude
//   tz_offset_min  utc_timestamp
// The timestamp is "EEE MMM dd HH:mm:ss Z yyyy", e.g.
// "Tue Apr 03 18:00:09 +0000 2012"; ISO-8601 ("2012-04-03T18:00:09Z",
// "+09:00" offsets allowed) is accepted as a fallback when enabled.

enum class LinePolicy { kSkip, kAbort };

struct MalformedLine {
  std::size_t line = 0;
  std::string reason;
};

struct CheckInParseOptions {
  LinePolicy policy = LinePolicy::kSkip;
  bool iso_fallback = true;
};

struct CheckInParseResult {
  std::vector<CheckIn> checkins;
  std::vector<MalformedLine> malformed;
};

CheckInParseResult parse_checkins(std::istream& in,
                                  const CheckInParseOptions& options = {});

// Writes the canonical form: UTC timestamps, shortest round-trip decimals.
void serialize_checkins(const std::vector<CheckIn>& checkins, std::ostream& out);

// Returns std::nullopt when the text is not a timestamp in [1970, 2100).
std::optional<Timestamp> parse_timestamp(std::string_view text,
                                         bool iso_fallback = true);
std::string format_timestamp(Timestamp t);

// ---------------------------------------------------------------------------
// Filters

class CategoryAllowlist {
 public:
  // Throws ConfigError when an entry repeats.
  explicit CategoryAllowlist(std::vector<std::string> names);

  // One category name per line; blank lines and '#' comments ignored.
  // An empty file is a ConfigError.
  static CategoryAllowlist load(std::istream& in);

  // The 80 food-related Foursquare categories.
  static CategoryAllowlist food_categories();

  bool contains(std::string_view name) const;
  std::size_t size() const { return names_.size(); }
  const std::set<std::string, std::less<>>& names() const { return names_; }

 private:
  std::set<std::string, std::less<>> names_;
};

std::vector<CheckIn> filter_by_category(const std::vector<CheckIn>& checkins,
                                        const CategoryAllowlist& allowlist);

// Keeps every check-in of users with at least `min_count` check-ins.
std::vector<CheckIn> filter_loyal_users(const std::vector<CheckIn>& checkins,
                                        std::size_t min_count = 100);

// ---------------------------------------------------------------------------
// Postal code table

struct PostalColumns {
  // Defaults follow the Japan Post KEN_ALL layout (UTF-8).
  std::size_t postal_code = 2;
  std::size_t municipality = 7;
};

struct PostalParseResult {
  PostalTable table;
  std::size_t duplicate_keys = 0;
  std::size_t skipped_rows = 0;
};

PostalParseResult parse_postal_table(std::istream& in,
                                     const PostalColumns& columns = {});

// Splits one comma-separated line honoring double quotes ("" escapes).
std::vector<std::string> split_csv_line(std::string_view line);

// ---------------------------------------------------------------------------
// Geocoding

struct Address {
  std::string postal_code;  // 7 digits, normalized
  std::string formatted;

  friend bool operator==(const Address&, const Address&) = default;
};

struct PlaceInfo {
  std::string name;
  std::vector<std::string> types;

  friend bool operator==(const PlaceInfo&, const PlaceInfo&) = default;
};

// Finds the first "ddd-dddd" or 7-digit run in a formatted address.
std::string extract_postal_code(std::string_view formatted);

class GeocoderBackend {
 public:
  virtual ~GeocoderBackend() = default;
  virtual Address reverse_geocode(const GeoPoint& point) = 0;
  virtual PlaceInfo resolve_place(const Address& address,
                                  std::string_view category_name) = 0;
};

// Coordinates rounded to 1e-6 degrees.
using PointKey = std::pair<std::int64_t, std::int64_t>;
PointKey point_key(const GeoPoint& point);

// Offline backend over JSON Lines records
//   {"lat":..,"lon":..,"postal_code":"160-0022","formatted":"..",
//    "name":"..","types":["food",..]}
// Places are looked up by formatted address (and optional "category").
class FixtureBackend : public GeocoderBackend {
 public:
  static std::unique_ptr<FixtureBackend> load(std::istream& in);

  Address reverse_geocode(const GeoPoint& point) override;
  PlaceInfo resolve_place(const Address& address,
                          std::string_view category_name) override;

  std::size_t size() const { return addresses_.size(); }

 private:
  std::map<PointKey, Address> addresses_;
  std::map<std::string, PlaceInfo, std::less<>> places_;
  std::map<std::pair<std::string, std::string>, PlaceInfo> places_by_category_;
};

struct HttpBackendConfig {
  std::string base_url;  // GEOCODER_BASE_URL, e.g. "http://localhost:8080"
  std::string api_key;   // GEOCODER_API_KEY
  int timeout_ms = 5000;
  int max_retries = 2;

  // Reads GEOCODER_BASE_URL and GEOCODER_API_KEY; ConfigError when the
  // base URL is unset.
  static HttpBackendConfig from_environment(int timeout_ms = 5000,
                                            int max_retries = 2);
};

// JSON-over-HTTP backend:
//   GET {base}/reverse?lat=..&lon=..&key=..   -> {"postal_code","formatted"}
//   GET {base}/place?address=..&category=..&key=.. -> {"name","types"}
// 404 is a lookup miss; other failures retry up to max_retries and then
// raise TransportError.
class HttpBackend : public GeocoderBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  Address reverse_geocode(const GeoPoint& point) override;
  PlaceInfo resolve_place(const Address& address,
                          std::string_view category_name) override;

 private:
  std::string get(const std::string& path);

  HttpBackendConfig config_;
};

// Caching front end. Results are memoized by rounded coordinates and by
// (address, category); safe for concurrent use.
class GeocoderClient {
 public:
  explicit GeocoderClient(std::unique_ptr<GeocoderBackend> backend);

  Address reverse_geocode(const GeoPoint& point);
  PlaceInfo resolve_place(const Address& address, std::string_view category_name);

  std::size_t cache_hits() const;
  std::size_t backend_calls() const;

 private:
  std::unique_ptr<GeocoderBackend> backend_;
  mutable std::mutex mu_;
  std::map<PointKey, Address> address_cache_;
  std::map<std::pair<std::string, std::string>, PlaceInfo> place_cache_;
  std::size_t hits_ = 0;
  std::size_t calls_ = 0;
};

Address reverse_geocode(GeocoderClient& client, const GeoPoint& point);
PlaceInfo resolve_place(GeocoderClient& client, const Address& address,
                        std::string_view category_name);

}  // namespace poirec

#endif  // POIREC_INGEST_HPP_
