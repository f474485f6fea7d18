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

#include "poirec/synth.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/foodtext.hpp"
#include "poirec/geospatial.hpp"
#include "poirec/ingest.hpp"
#include "poirec/random.hpp"

namespace poirec {
namespace {

using nlohmann::json;

constexpr std::string_view kFiller[] = {
    "plate",   "bowl",    "served",  "with",    "fresh",   "sauce",
    "rice",    "slice",   "table",   "wooden",  "white",   "small",
    "large",   "side",    "topped",  "green",   "golden",  "crispy",
    "warm",    "dish",    "portion", "garnish", "cup",     "spoon",
    "light",   "fork",  "colorful", "round",  "tray",    "bright",
    "simple",  "layered", "sliced",  "steaming", "glazed", "soft",
    "cream",   "herbs",   "pieces",  "background"};

constexpr double kLatOrigin = 35.60, kLonOrigin = 139.60;
constexpr double kLatStep = 0.02, kLonStep = 0.025;
constexpr double kLatJitter = 0.0025, kLonJitter = 0.003;
constexpr int kTokyoOffsetMin = 540;

std::string hex_id(Rng& rng, std::size_t digits) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < digits; ++i) s.push_back(kHex[uniform_index(rng, 16)]);
  return s;
}

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  static constexpr std::string_view kCons = "bdfghjklmnprstvz";
  static constexpr std::string_view kVow = "aeiou";
  std::string s;
  for (std::size_t i = 0; i < syllables; ++i) {
    s.push_back(kCons[uniform_index(rng, kCons.size())]);
    s.push_back(kVow[uniform_index(rng, kVow.size())]);
  }
  return s;
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

std::vector<std::size_t> owners(std::size_t n, std::size_t topic, std::size_t topics) {
  std::vector<std::size_t> out;
  for (std::size_t i = topic; i < n; i += topics) out.push_back(i);
  return out;
}

}  // namespace

SignalMode parse_signal_mode(std::string_view name) {
  if (name == "desc_only") return SignalMode::kDescOnly;
  if (name == "category") return SignalMode::kCategory;
  if (name == "geo") return SignalMode::kGeo;
  throw ConfigError("unknown signal mode '" + std::string(name) + "'");
}

std::string to_string(SignalMode mode) {
  switch (mode) {
    case SignalMode::kDescOnly: return "desc_only";
    case SignalMode::kCategory: return "category";
    case SignalMode::kGeo: return "geo";
  }
  return "";
}

void SynthConfig::validate() const {
  if (users == 0) throw ConfigError("synth: users must be positive");
  if (topics == 0) throw ConfigError("synth: topics must be positive");
  if (venues < 10 * topics) throw ConfigError("synth: need venues >= 10 * topics");
  if (!(fidelity > 0.0 && fidelity <= 1.0)) {
    throw ConfigError("synth: fidelity must lie in (0, 1]");
  }
  if (min_length < kMinSequenceLength) throw ConfigError("synth: min_length must be >= 2");
  if (min_length > max_length) throw ConfigError("synth: min_length > max_length");
  if (categories == 0 || categories > CategoryAllowlist::food_categories().size()) {
    throw ConfigError("synth: categories must lie in [1, " +
                      std::to_string(CategoryAllowlist::food_categories().size()) + "]");
  }
  if (geo_cells == 0 || geo_cells > 899) {
    throw ConfigError("synth: geo_cells must lie in [1, 899]");
  }
  if (keywords_per_caption == 0 || keywords_per_caption > keywords_per_topic) {
    throw ConfigError("synth: keywords_per_caption must lie in [1, keywords_per_topic]");
  }
  if (images_per_venue == 0) throw ConfigError("synth: images_per_venue must be positive");
  if (mode == SignalMode::kCategory && categories < topics) {
    throw ConfigError("synth: category mode leaves a topic without a category");
  }
  if (mode == SignalMode::kGeo && geo_cells < topics) {
    throw ConfigError("synth: geo mode leaves a topic without a cell");
  }
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  const std::uint64_t seed = config.seed;
  SynthData d;
  d.config = config;
  const std::size_t V = config.venues, T = config.topics;

  // Topic keywords, distinct from each other and from the filler words.
  {
    Rng rng = substream(seed, "keywords");
    std::set<std::string> used(std::begin(kFiller), std::end(kFiller));
    d.topic_keywords.resize(T);
    for (auto& words : d.topic_keywords) {
      while (words.size() < config.keywords_per_topic) {
        std::string w = pseudo_word(rng, 3);
        if (used.insert(w).second) words.push_back(std::move(w));
      }
    }
  }

  std::vector<std::size_t> topic(V);
  for (std::size_t i = 0; i < V; ++i) topic[i] = i % T;
  {
    Rng rng = substream(seed, "topics");
    shuffle(topic, rng);
  }

  std::vector<std::string> category_names;
  const CategoryAllowlist food = CategoryAllowlist::food_categories();
  for (const auto& name : food.names()) {
    if (category_names.size() == config.categories) break;
    category_names.push_back(name);
  }
  std::vector<std::string> category_ids;
  {
    Rng rng = substream(seed, "category_ids");
    for (std::size_t c = 0; c < config.categories; ++c) {
      category_ids.push_back(hex_id(rng, 24));
    }
  }

  const std::size_t side =
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(config.geo_cells))));
  Rng id_rng = substream(seed, "venue_ids");
  Rng attr_rng = substream(seed, "attributes");
  Rng geo_rng = substream(seed, "coordinates");
  std::set<std::string> ids;
  std::set<PointKey> points;
  d.venues.reserve(V);
  for (std::size_t i = 0; i < V; ++i) {
    SynthVenue v;
    do {
      v.venue_id = hex_id(id_rng, 24);
    } while (!ids.insert(v.venue_id).second);
    std::string name = pseudo_word(attr_rng, 2) + " " + pseudo_word(attr_rng, 3);
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    v.name = std::move(name);
    v.topic = topic[i];

    std::size_t category = uniform_index(attr_rng, config.categories);
    std::size_t area = uniform_index(attr_rng, config.geo_cells);
    if (config.mode == SignalMode::kCategory) {
      const auto own = owners(config.categories, v.topic, T);
      category = own[uniform_index(attr_rng, own.size())];
    } else if (config.mode == SignalMode::kGeo) {
      const auto own = owners(config.geo_cells, v.topic, T);
      area = own[uniform_index(attr_rng, own.size())];
    }
    v.category_name = category_names[category];
    v.category_id = category_ids[category];
    v.area = area;

    const double lat0 = kLatOrigin + kLatStep * static_cast<double>(area / side);
    const double lon0 = kLonOrigin + kLonStep * static_cast<double>(area % side);
    const CellId cell = h3_cell(lat0, lon0);
    do {
      v.geo = GeoPoint(round6(lat0 + kLatJitter * (2.0 * uniform_real(geo_rng) - 1.0)),
                       round6(lon0 + kLonJitter * (2.0 * uniform_real(geo_rng) - 1.0)));
    } while (h3_cell(v.geo) != cell || !points.insert(point_key(v.geo)).second);

    char postal[16];
    std::snprintf(postal, sizeof(postal), "%03zu-%04zu", 100 + area, 1000 + area);
    v.postal_code = postal;
    v.municipality = "Area" + std::to_string(area + 1);
    v.formatted_address = "Japan, \xE3\x80\x92" + v.postal_code + " Tokyo, " +
                          v.municipality + ", 1-" + std::to_string(i + 1);
    d.venues.push_back(std::move(v));
  }

  // Captions: filler words with (desc_only) a few topic keywords mixed in.
  {
    Rng rng = substream(seed, "captions");
    const std::size_t n_words = config.filler_per_caption + config.keywords_per_caption;
    std::size_t image = 0;
    for (auto& v : d.venues) {
      for (std::size_t j = 0; j < config.images_per_venue; ++j) {
        char id[32];
        std::snprintf(id, sizeof(id), "img%06zu", ++image);
        v.image_ids.push_back(id);
        std::vector<std::string> words;
        for (std::size_t w = 0; w < n_words; ++w) {
          words.emplace_back(kFiller[uniform_index(rng, std::size(kFiller))]);
        }
        if (config.mode == SignalMode::kDescOnly) {
          const auto& kw = d.topic_keywords[v.topic];
          const auto pick = sample_without_replacement(rng, kw.size(),
                                                       config.keywords_per_caption);
          const auto slots = sample_without_replacement(rng, n_words,
                                                        config.keywords_per_caption);
          for (std::size_t k = 0; k < pick.size(); ++k) words[slots[k]] = kw[pick[k]];
        }
        std::string caption;
        for (const auto& w : words) caption += (caption.empty() ? "" : " ") + w;
        caption[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(caption[0])));
        caption.push_back('.');
        d.captions.emplace_back(id, std::move(caption));
      }
    }
  }

  std::vector<std::vector<std::size_t>> by_topic(T);
  for (std::size_t i = 0; i < V; ++i) by_topic[d.venues[i].topic].push_back(i);

  {
    Rng rng = substream(seed, "preferences");
    for (std::size_t u = 0; u < config.users; ++u) {
      d.user_ids.push_back(std::to_string(u + 1));
      d.preferred_topic.push_back(uniform_index(rng, T));
    }
  }

  const Timestamp start =
      Timestamp(std::chrono::sys_days(std::chrono::year{2012} / 4 / 3));
  for (std::size_t u = 0; u < config.users; ++u) {
    Rng rng = substream(seed, "user:" + d.user_ids[u]);
    const std::size_t len =
        config.min_length + uniform_index(rng, config.max_length - config.min_length + 1);
    auto t = start + std::chrono::seconds(uniform_index(rng, 30 * 86400));
    const auto& own = by_topic[d.preferred_topic[u]];
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t venue = uniform_real(rng) < config.fidelity
                                    ? own[uniform_index(rng, own.size())]
                                    : uniform_index(rng, V);
      const SynthVenue& v = d.venues[venue];
      CheckIn c;
      c.user_id = d.user_ids[u];
      c.venue_id = v.venue_id;
      c.category_id = v.category_id;
      c.category_name = v.category_name;
      c.geo = v.geo;
      c.tz_offset_min = kTokyoOffsetMin;
      c.timestamp_utc = t;
      d.checkins.push_back(std::move(c));
      t += std::chrono::seconds(3600 + uniform_index(rng, 47 * 3600));
    }
  }
  return d;
}

void write_checkins(const SynthData& data, std::ostream& out) {
  serialize_checkins(data.checkins, out);
}

void write_postal(const SynthData& data, std::ostream& out) {
  std::set<std::size_t> areas;
  for (const auto& v : data.venues) areas.insert(v.area);
  for (std::size_t area : areas) {
    char line[160];
    std::snprintf(line, sizeof(line),
                  "13%03zu,\"%03zu  \",\"%03zu%04zu\",\"TOKYO\",\"AREA\",\"\","
                  "\"Tokyo\",\"Area%zu\",\"\",0,0,0,0,0,0\n",
                  area + 101, 100 + area, 100 + area, 1000 + area, area + 1);
    out << line;
  }
}

void write_geocoder_fixtures(const SynthData& data, std::ostream& out) {
  for (const auto& v : data.venues) {
    json j;
    j["lat"] = v.geo.lat();
    j["lon"] = v.geo.lon();
    j["postal_code"] = v.postal_code;
    j["formatted"] = v.formatted_address;
    j["name"] = v.name;
    j["types"] = {"restaurant", "food", "point_of_interest", "establishment"};
    out << j.dump() << '\n';
  }
}

void write_captions(const SynthData& data, std::ostream& out) {
  for (const auto& [id, caption] : data.captions) {
    out << json{{"image_id", id}, {"caption", caption}}.dump() << '\n';
  }
}

void write_allocation(const SynthData& data, std::ostream& out) {
  Allocation a;
  for (const auto& v : data.venues) a[v.venue_id] = v.image_ids;
  save_allocation(a, out);
}

void write_ground_truth(const SynthData& data, std::ostream& out) {
  for (const auto& v : data.venues) {
    out << json{{"venue_id", v.venue_id}, {"topic", v.topic}}.dump() << '\n';
  }
  for (std::size_t u = 0; u < data.user_ids.size(); ++u) {
    out << json{{"user_id", data.user_ids[u]},
                {"preferred_topic", data.preferred_topic[u]}}.dump()
        << '\n';
  }
}

void write_synth_files(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto emit = [&](std::string_view name, void (*writer)(const SynthData&, std::ostream&)) {
    std::ofstream out(dir / std::string(name), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / std::string(name)).string());
    writer(data, out);
    if (!out) throw Error("write failed: " + (dir / std::string(name)).string());
  };
  emit(synth_files::kCheckins, write_checkins);
  emit(synth_files::kPostal, write_postal);
  emit(synth_files::kGeocoder, write_geocoder_fixtures);
  emit(synth_files::kCaptions, write_captions);
  emit(synth_files::kAllocation, write_allocation);
  emit(synth_files::kGroundTruth, write_ground_truth);
}

}  // namespace poirec
