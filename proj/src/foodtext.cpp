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

#include "poirec/foodtext.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/ingest.hpp"
#include "poirec/random.hpp"

namespace poirec {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Largest prefix of at most n bytes that does not split a UTF-8 sequence.
std::string utf8_prefix(const std::string& s, std::size_t n) {
  if (s.size() <= n) return s;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return s.substr(0, n);
}

std::string single_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

template <typename F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

}  // namespace

std::string normalize_category(std::string_view name) {
  std::string out;
  bool space = false;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ClassMapping::ClassMapping(std::map<std::string, std::vector<std::string>> entries) {
  std::map<std::string, std::size_t> uses;
  for (auto& [category, classes] : entries) {
    if (classes.empty()) {
      throw ConfigError("category '" + category + "' has no image classes");
    }
    auto& slot = entries_[normalize_category(category)];
    for (auto& c : classes) {
      if (std::find(slot.begin(), slot.end(), c) != slot.end()) continue;
      if (++uses[c] > kMaxCategoriesPerClass) {
        throw ConfigError("image class '" + c + "' mapped to more than " +
                          std::to_string(kMaxCategoriesPerClass) + " categories");
      }
      slot.push_back(std::move(c));
    }
  }
}

ClassMapping ClassMapping::builtin() {
  return ClassMapping({
      {"American Restaurant",
       {"buffalo_wing", "clam_chowder", "fried_egg", "hamburger",
        "hot_dog", "macaroni_and_cheese", "salisbury_steak",
        "tetrazzini"}},
      {"Asian Restaurant",
       {"pad_thai", "pho", "spring_roll", "fried_rice"}},
      {"BBQ Joint",
       {"barbecued_spareribs", "barbecued_wing"}},
      {"Bakery",
       {"sausage_roll"}},
      {"Breakfast Spot",
       {"bacon_and_eggs", "boiled_egg", "eggs_benedict",
        "ham_and_eggs"}},
      {"Burger Joint",
       {"hamburger"}},
      {"Chinese Restaurant",
       {"egg_roll", "fried_rice", "gyoza", "moo_goo_gai_pan",
        "peking_duck", "spring_roll", "wonton"}},
      {"Dessert Shop",
       {"apple_pie", "cheesecake", "chiffon_cake", "chocolate_cake",
        "cupcake", "fruitcake", "macaron"}},
      {"Donut Shop",
       {"donut"}},
      {"Dumpling Restaurant",
       {"dumpling"}},
      {"Fast Food Restaurant",
       {"fish_stick", "french_fries", "bacon_lettuce_tomato_sandwich",
        "club_sandwich", "grilled_cheese_sandwich", "ham_sandwich",
        "hamburger", "hot_dog", "lobster_roll_sandwich",
        "pulled_pork_sandwich", "victoria_sandwich"}},
      {"French Restaurant",
       {"beef_bourguignonne", "casserole", "chicken_cordon_bleu",
        "coq_au_vin", "coquilles_saint_jacques", "escargot",
        "filet_mignon", "foie_gras", "lobster_bisque",
        "steak_au_poivre", "steak_tartare", "veal_cordon_bleu",
        "vol_au_vent"}},
      {"German Restaurant",
       {"sauerbraten", "sauerkraut", "schnitzel"}},
      {"Hot Dog Joint",
       {"hot_dog"}},
      {"Ice Cream Shop",
       {"ice_cream"}},
      {"Indian Restaurant",
       {"biryani", "chicken_curry"}},
      {"Italian Restaurant",
       {"beef_carpaccio", "bruschetta", "caprese_salad", "fettuccine",
        "frittata", "gnocchi", "lasagna", "linguine", "panna_cotta",
        "penne", "pizza", "ravioli", "rigatoni", "risotto",
        "spaghetti_bolognese", "spaghetti_carbonara", "tagliatelle",
        "tiramisu", "tortellini", "ziti"}},
      {"Japanese Restaurant",
       {"edamame", "miso_soup", "sashimi", "sukiyaki", "takoyaki",
        "tempura"}},
      {"Korean Restaurant",
       {"bibimbap"}},
      {"Mexican Restaurant",
       {"chili", "enchilada", "guacamole", "nacho", "taco", "tostada"}},
      {"Pizza Place",
       {"pizza"}},
      {"Ramen / Noodle House",
       {"ramen"}},
      {"Sandwich Place",
       {"bacon_lettuce_tomato_sandwich", "club_sandwich",
        "grilled_cheese_sandwich", "ham_sandwich",
        "lobster_roll_sandwich", "pulled_pork_sandwich",
        "victoria_sandwich"}},
      {"Seafood Restaurant",
       {"clam_food", "cockle_food", "crab_food", "lobster_food",
        "seaweed_salad", "sashimi"}},
      {"Spanish Restaurant",
       {"adobo", "paella"}},
      {"Steakhouse",
       {"pepper_steak"}},
      {"Sushi Restaurant",
       {"sushi"}},
      {"Thai Restaurant",
       {"pad_thai", "fried_rice"}},
      {"Vegetarian / Vegan Restaurant",
       {"beet_salad", "caesar_salad", "caprese_salad"}},
      {"Vietnamese Restaurant",
       {"pho"}},
  });
}

ClassMapping ClassMapping::load(std::istream& in) {
  std::map<std::string, std::vector<std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw ParseError("expected 2 columns", lineno);
    const std::string category = trim(fields[0]);
    const std::string image_class = trim(fields[1]);
    if (lineno == 1 && category == "venue_category") continue;
    if (category.empty() || image_class.empty()) {
      throw ParseError("empty category or class", lineno);
    }
    entries[category].push_back(image_class);
  }
  return ClassMapping(std::move(entries));
}

const std::vector<std::string>& ClassMapping::classes_for(
    std::string_view category) const {
  static const std::vector<std::string> kNone;
  const auto it = entries_.find(normalize_category(category));
  return it == entries_.end() ? kNone : it->second;
}

std::vector<std::string> ClassMapping::categories() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

std::vector<std::string> ClassMapping::distinct_classes() const {
  std::set<std::string> all;
  for (const auto& [k, v] : entries_) all.insert(v.begin(), v.end());
  return {all.begin(), all.end()};
}

// ---------------------------------------------------------------------------

CaptionStore CaptionStore::load(std::istream& in) {
  CaptionStore store;
  for_each_json_line(in, [&](const json& j) {
    store.add(j.at("image_id").get<std::string>(),
              j.at("caption").get<std::string>());
  });
  return store;
}

void CaptionStore::add(std::string image_id, std::string caption) {
  if (image_id.empty()) throw ValidationError("empty image id");
  if (caption.empty()) throw ValidationError("empty caption for " + image_id);
  captions_.insert_or_assign(std::move(image_id), std::move(caption));
}

bool CaptionStore::contains(std::string_view image_id) const {
  return captions_.find(image_id) != captions_.end();
}

const std::string& CaptionStore::at(std::string_view image_id) const {
  const auto it = captions_.find(image_id);
  if (it == captions_.end()) {
    throw LookupMiss("no caption for image " + std::string(image_id));
  }
  return it->second;
}

// ---------------------------------------------------------------------------

Pool sample_pool(const ClassMapping& mapping, std::string_view category,
                 const ClassImages& class_images, std::size_t poi_count,
                 std::uint64_t seed) {
  const auto& classes = mapping.classes_for(category);
  if (classes.empty()) {
    throw ConfigError("category '" + std::string(category) +
                      "' maps to no image class");
  }
  std::set<std::string> unique;
  for (const auto& c : classes) {
    if (auto it = class_images.find(c); it != class_images.end()) {
      unique.insert(it->second.begin(), it->second.end());
    }
  }
  if (unique.empty()) {
    throw ConfigError("no images for category '" + std::string(category) + "'");
  }
  const std::vector<std::string> candidates(unique.begin(), unique.end());
  const std::size_t n = std::max(poi_count, kMinPoolSize);

  Rng rng = substream(seed, "pool:" + normalize_category(category));
  Pool pool;
  const std::size_t distinct = std::min(n, candidates.size());
  for (std::size_t i : sample_without_replacement(rng, candidates.size(), distinct)) {
    pool.image_ids.push_back(candidates[i]);
  }
  // Too few images: use every one, then top up with repeats.
  while (pool.image_ids.size() < n) {
    pool.with_replacement = true;
    pool.image_ids.push_back(candidates[uniform_index(rng, candidates.size())]);
  }
  return pool;
}

Allocation allocate(const std::vector<std::string>& pois,
                    const std::vector<std::string>& pool, std::size_t k,
                    std::uint64_t seed) {
  const std::set<std::string> unique(pool.begin(), pool.end());
  if (unique.size() < k) {
    throw ValidationError("pool has " + std::to_string(unique.size()) +
                          " distinct images, need " + std::to_string(k));
  }
  const std::vector<std::string> ids(unique.begin(), unique.end());
  Rng rng = substream(seed, "allocate");
  Allocation out;
  for (const auto& poi : pois) {
    std::vector<std::string> picks;
    for (std::size_t i : sample_without_replacement(rng, ids.size(), k)) {
      picks.push_back(ids[i]);
    }
    if (!out.emplace(poi, std::move(picks)).second) {
      throw ValidationError("duplicate venue id " + poi);
    }
  }
  return out;
}

Allocation load_allocation(std::istream& in) {
  Allocation out;
  for_each_json_line(in, [&](const json& j) {
    auto ids = j.at("image_ids").get<std::vector<std::string>>();
    const std::set<std::string> unique(ids.begin(), ids.end());
    if (ids.empty() || unique.size() != ids.size()) {
      throw ValidationError("image ids must be non-empty and distinct");
    }
    out[j.at("venue_id").get<std::string>()] = std::move(ids);
  });
  return out;
}

void save_allocation(const Allocation& allocation, std::ostream& out) {
  for (const auto& [venue, ids] : allocation) {
    out << json{{"venue_id", venue}, {"image_ids", ids}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

std::string combine_captions(const std::vector<std::string>& captions) {
  std::string out;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += std::to_string(i + 1) + ". " + single_line(captions[i]);
  }
  return out;
}

std::string NumberedSummarizer::summarize(const std::vector<std::string>& captions) {
  return utf8_prefix(combine_captions(captions), budget_);
}

void write_summary_requests(const std::vector<std::string>& combined,
                            std::ostream& out) {
  for (const auto& c : combined) out << single_line(c) << '\n';
}

std::vector<std::string> read_summaries(std::istream& in, std::size_t expected) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  if (out.size() != expected) {
    throw ValidationError("expected " + std::to_string(expected) +
                          " summaries, got " + std::to_string(out.size()));
  }
  return out;
}

PrecomputedSummarizer::PrecomputedSummarizer(
    const std::vector<std::string>& combined,
    const std::vector<std::string>& summaries) {
  if (combined.size() != summaries.size()) {
    throw ValidationError("request and summary counts differ");
  }
  for (std::size_t i = 0; i < combined.size(); ++i) {
    by_record_[single_line(combined[i])] = summaries[i];
  }
}

std::string PrecomputedSummarizer::summarize(
    const std::vector<std::string>& captions) {
  const auto it = by_record_.find(combine_captions(captions));
  if (it == by_record_.end()) throw LookupMiss("no summary for caption record");
  return it->second;
}

std::string assemble_description(const std::vector<std::string>& image_ids,
                                 const CaptionStore& store,
                                 Summarizer& summarizer) {
  std::string missing;
  std::vector<std::string> captions;
  for (const auto& id : image_ids) {
    if (!store.contains(id)) {
      missing += (missing.empty() ? "" : ", ") + id;
    } else {
      captions.push_back(store.at(id));
    }
  }
  if (!missing.empty()) throw LookupMiss("captions missing for: " + missing);
  return summarizer.summarize(captions);
}

std::map<std::string, std::string> load_descriptions(std::istream& in) {
  std::map<std::string, std::string> out;
  for_each_json_line(in, [&](const json& j) {
    out[j.at("venue_id").get<std::string>()] = j.at("venue_desc").get<std::string>();
  });
  return out;
}

}  // namespace poirec
