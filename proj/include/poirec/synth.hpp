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

#ifndef POIREC_SYNTH_HPP_
#define POIREC_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poirec/domain.hpp"

namespace poirec {

// Which venue attribute reveals the hidden topic.
enum class SignalMode { kDescOnly, kCategory, kGeo };

// "desc_only", "category", "geo"; ConfigError otherwise.
SignalMode parse_signal_mode(std::string_view name);
std::string to_string(SignalMode mode);

struct SynthConfig {
  std::size_t users = 200;
  std::size_t venues = 500;
  std::size_t categories = 10;
  std::size_t geo_cells = 25;
  std::size_t topics = 10;
  std::size_t keywords_per_topic = 5;
  std::size_t keywords_per_caption = 3;
  std::size_t filler_per_caption = 10;
  std::size_t images_per_venue = 8;
  std::size_t min_length = 20;
  std::size_t max_length = 60;
  double fidelity = 0.8;
  SignalMode mode = SignalMode::kDescOnly;
  std::uint64_t seed = 0;

  // ConfigError when V < 10 T, p outside (0, 1], min length < 2,
  // min > max, more categories than food categories, or a topic would own
  // no venue, category or cell in its signal mode.
  void validate() const;
};

struct SynthVenue {
  std::string venue_id;
  std::string name;
  std::string category_id;
  std::string category_name;
  std::size_t topic = 0;
  std::size_t area = 0;
  GeoPoint geo;
  std::string postal_code;  // "ddd-dddd"
  std::string municipality;
  std::string formatted_address;
  std::vector<std::string> image_ids;
};

struct SynthData {
  SynthConfig config;
  std::vector<SynthVenue> venues;
  std::vector<std::string> user_ids;
  std::vector<std::size_t> preferred_topic;  // per user
  std::vector<CheckIn> checkins;             // grouped by user, chronological
  std::vector<std::pair<std::string, std::string>> captions;  // image id, text
  std::vector<std::vector<std::string>> topic_keywords;
};

// Planted-signal corpus. Each venue has a hidden topic, spread evenly over
// venues; each user prefers one topic. Every check-in is, with probability
// `fidelity`, a uniformly random venue of the preferred topic and otherwise
// a uniformly random venue. Only the attribute selected by `mode` depends on
// the topic; names are random identifiers. All venues of an area lie in
// one hexagonal cell.
SynthData generate(const SynthConfig& config);

// File names written by write_synth_files.
namespace synth_files {
inline constexpr std::string_view kCheckins = "checkins.tsv";
inline constexpr std::string_view kPostal = "postal.csv";
inline constexpr std::string_view kGeocoder = "geocoder.jsonl";
inline constexpr std::string_view kCaptions = "captions.jsonl";
inline constexpr std::string_view kAllocation = "allocation.jsonl";
inline constexpr std::string_view kGroundTruth = "ground_truth.jsonl";
}  // namespace synth_files

void write_checkins(const SynthData& data, std::ostream& out);
// KEN_ALL-shaped rows: postal code in column 2, municipality in column 7.
void write_postal(const SynthData& data, std::ostream& out);
void write_geocoder_fixtures(const SynthData& data, std::ostream& out);
void write_captions(const SynthData& data, std::ostream& out);
void write_allocation(const SynthData& data, std::ostream& out);
// {"venue_id", "topic"} records, then {"user_id", "preferred_topic"}.
void write_ground_truth(const SynthData& data, std::ostream& out);

// Writes every file above into `dir`, creating it if needed.
void write_synth_files(const SynthData& data, const std::filesystem::path& dir);

}  // namespace poirec

#endif  // POIREC_SYNTH_HPP_
