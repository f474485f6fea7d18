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

#ifndef POIREC_DOMAIN_HPP_
#define POIREC_DOMAIN_HPP_

#include <array>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace poirec {

using Timestamp = std::chrono::sys_seconds;

// A WGS84 coordinate in degrees. Construction validates the ranges.
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon);

  double lat() const { return lat_; }
  double lon() const { return lon_; }

  static bool valid(double lat, double lon);

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

struct CheckIn {
  std::string user_id;
  std::string venue_id;
  std::string category_id;
  std::string category_name;
  GeoPoint geo;
  int tz_offset_min = 0;
  Timestamp timestamp_utc{};

  friend bool operator==(const CheckIn&, const CheckIn&) = default;
};

namespace attr {
inline constexpr std::string_view kCategory = "venue_category";
inline constexpr std::string_view kArea = "venue_area";
inline constexpr std::string_view kName = "venue_name";
inline constexpr std::string_view kDesc = "venue_desc";
inline constexpr std::string_view kTypes = "venue_types";

// Canonical attribute order; venue_types last.
inline constexpr std::array<std::string_view, 5> kCanonicalOrder = {
    kCategory, kArea, kName, kDesc, kTypes};
}  // namespace attr

using Attribute = std::pair<std::string, std::string>;

// Ordered attribute dictionary of one venue.
class PoiMeta {
 public:
  PoiMeta() = default;

  // Reorders `attributes` canonically. Throws ValidationError on unknown or
  // duplicate keys, empty values or an empty venue id.
  PoiMeta(std::string venue_id, std::vector<Attribute> attributes);

  const std::string& venue_id() const { return venue_id_; }
  const std::vector<Attribute>& attributes() const { return attributes_; }

  std::optional<std::string> find(std::string_view key) const;

  // Copy with `key` removed (no-op when absent).
  PoiMeta without(std::string_view key) const;

  friend bool operator==(const PoiMeta&, const PoiMeta&) = default;

 private:
  std::string venue_id_;
  std::vector<Attribute> attributes_;
};

struct SequenceItem {
  std::string venue_id;
  Timestamp timestamp{};

  friend bool operator==(const SequenceItem&, const SequenceItem&) = default;
};

struct UserSequence {
  std::string user_id;
  std::vector<SequenceItem> items;

  friend bool operator==(const UserSequence&, const UserSequence&) = default;
};

struct Corpus {
  std::map<std::string, PoiMeta> pois;
  std::vector<UserSequence> sequences;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

inline constexpr std::size_t kMinSequenceLength = 2;

// One sequence per distinct user, ordered by user id. Items are sorted by
// (timestamp, venue_id); duplicates are kept.
std::vector<UserSequence> build_sequences(const std::vector<CheckIn>& checkins);

enum class ViolationPolicy { kReject, kDrop };

struct ValidationReport {
  std::size_t dangling_items = 0;
  std::size_t short_sequences = 0;

  bool empty() const { return dangling_items == 0 && short_sequences == 0; }
  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

struct ValidatedCorpus {
  Corpus corpus;
  ValidationReport report;
};

// Enforces that every sequence item names a known venue and that each
// sequence keeps at least kMinSequenceLength items. With kReject the first
// dangling venue id raises ValidationError.
ValidatedCorpus validate_corpus(const Corpus& corpus, ViolationPolicy policy);

}  // namespace poirec

#endif  // POIREC_DOMAIN_HPP_
