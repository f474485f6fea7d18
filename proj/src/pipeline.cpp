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

#include "poirec/pipeline.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/random.hpp"

namespace poirec {
namespace {

using nlohmann::json;

std::size_t code_points(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

StageCount count_stage(std::string name, const std::vector<CheckIn>& checkins) {
  std::set<std::string_view> users, venues;
  for (const auto& c : checkins) {
    users.insert(c.user_id);
    venues.insert(c.venue_id);
  }
  return {std::move(name), users.size(), checkins.size(), venues.size()};
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

}  // namespace

std::optional<std::string> ReadyDescriptions::describe(const std::string& venue_id) {
  const auto it = descriptions_.find(venue_id);
  if (it == descriptions_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> CaptionDescriptions::describe(const std::string& venue_id) {
  const auto it = allocation_.find(venue_id);
  if (it == allocation_.end()) return std::nullopt;
  return assemble_description(it->second, captions_, summarizer_);
}

ClassImages load_class_images(std::istream& in) {
  ClassImages out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected image_id,image_class", lineno);
    }
    if (lineno == 1 && fields[0] == "image_id") continue;
    out[fields[1]].push_back(fields[0]);
  }
  return out;
}

Allocation allocate_by_category(
    const ClassMapping& mapping, const ClassImages& class_images,
    const std::map<std::string, std::vector<std::string>>& venues_by_category,
    std::uint64_t seed) {
  Allocation out;
  for (const auto& [category, venues] : venues_by_category) {
    if (mapping.classes_for(category).empty()) continue;
    const Pool pool = sample_pool(mapping, category, class_images, venues.size(), seed);
    const std::uint64_t sub = substream(seed, "allocate:" + normalize_category(category))();
    for (auto& [venue, images] : allocate(venues, pool.image_ids, kImagesPerPoi, sub)) {
      if (!out.emplace(venue, std::move(images)).second) {
        throw ValidationError("venue " + venue + " listed under two categories");
      }
    }
  }
  return out;
}

const StageCount& PrepareReport::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.stage == name) return s;
  }
  throw LookupMiss("no stage '" + name + "'");
}

std::string PrepareReport::to_json() const {
  json j;
  j["malformed_lines"] = malformed_lines;
  j["stages"] = json::array();
  for (const auto& s : stages) {
    j["stages"].push_back(
        {{"stage", s.stage}, {"users", s.users}, {"checkins", s.checkins}, {"pois", s.pois}});
  }
  j["dropped_venues"] = dropped_venues;
  j["venues_without_desc"] = venues_without_desc;
  j["mean_desc_chars"] = mean_desc_chars;
  return j.dump(2) + "\n";
}

PrepareResult prepare(const std::vector<CheckIn>& checkins,
                      const CategoryAllowlist& allowlist, const PostalTable& postal,
                      GeocoderClient& geocoder, DescriptionProvider* descriptions,
                      const PrepareOptions& options, std::size_t malformed_lines) {
  PrepareResult result;
  PrepareReport& report = result.report;
  report.malformed_lines = malformed_lines;
  report.stages.push_back(count_stage("input", checkins));

  const auto by_category = filter_by_category(checkins, allowlist);
  report.stages.push_back(count_stage("category_filter", by_category));
  const auto loyal = filter_loyal_users(by_category, options.min_checkins);
  report.stages.push_back(count_stage("loyalty_filter", loyal));

  // First check-in of each venue supplies its coordinate and category.
  std::map<std::string, const CheckIn*> first;
  for (const auto& c : loyal) first.emplace(c.venue_id, &c);

  std::size_t desc_chars = 0, with_desc = 0;
  for (const auto& [venue, c] : first) {
    std::string municipality;
    PlaceInfo place;
    try {
      const Address address = geocoder.reverse_geocode(c->geo);
      try {
        municipality = municipality_of(address.postal_code, postal);
      } catch (const LookupMiss&) {
        ++report.dropped_venues["unknown_postal_code"];
        continue;
      }
      try {
        place = geocoder.resolve_place(address, c->category_name);
      } catch (const LookupMiss&) {
        ++report.dropped_venues["place_not_found"];
        continue;
      }
    } catch (const LookupMiss&) {
      ++report.dropped_venues["address_not_found"];
      continue;
    }

    std::vector<Attribute> attrs{
        {std::string(attr::kCategory), c->category_name},
        {std::string(attr::kArea), geokey(municipality, h3_cell(c->geo, options.cell))},
        {std::string(attr::kName), place.name}};
    if (!place.types.empty()) {
      attrs.emplace_back(std::string(attr::kTypes), join(place.types, ", "));
    }
    std::optional<std::string> desc;
    if (descriptions != nullptr) {
      try {
        desc = descriptions->describe(venue);
      } catch (const LookupMiss&) {
        ++report.dropped_venues["description_inputs_missing"];
        continue;
      }
    }
    if (desc && !desc->empty()) {
      desc_chars += code_points(*desc);
      ++with_desc;
      attrs.emplace_back(std::string(attr::kDesc), std::move(*desc));
    } else {
      ++report.venues_without_desc;
    }
    result.corpus.pois.emplace(venue, PoiMeta(venue, std::move(attrs)));
  }
  report.mean_desc_chars =
      with_desc == 0 ? 0.0 : static_cast<double>(desc_chars) / static_cast<double>(with_desc);

  std::vector<CheckIn> attributed;
  for (const auto& c : loyal) {
    if (result.corpus.pois.count(c.venue_id) != 0) attributed.push_back(c);
  }
  report.stages.push_back(count_stage("attributed", attributed));

  Corpus raw{std::move(result.corpus.pois), build_sequences(attributed)};
  result.corpus = validate_corpus(raw, ViolationPolicy::kDrop).corpus;

  // Venues only visited by dropped users leave the corpus as well.
  std::set<std::string> visited;
  std::size_t interactions = 0;
  for (const auto& s : result.corpus.sequences) {
    interactions += s.items.size();
    for (const auto& i : s.items) visited.insert(i.venue_id);
  }
  std::erase_if(result.corpus.pois, [&](const auto& kv) { return !visited.count(kv.first); });
  report.stages.push_back(
      {"final", result.corpus.sequences.size(), interactions, result.corpus.pois.size()});
  return result;
}

PrepareResult prepare_synth(const SynthData& data) {
  std::stringstream checkins_tsv, postal_csv, fixtures, captions_jsonl, allocation_jsonl;
  write_checkins(data, checkins_tsv);
  write_postal(data, postal_csv);
  write_geocoder_fixtures(data, fixtures);
  write_captions(data, captions_jsonl);
  write_allocation(data, allocation_jsonl);

  CheckInParseOptions parse_options;
  parse_options.policy = LinePolicy::kAbort;
  const auto parsed = parse_checkins(checkins_tsv, parse_options);
  const PostalTable postal = parse_postal_table(postal_csv).table;
  GeocoderClient geocoder(FixtureBackend::load(fixtures));
  const CaptionStore captions = CaptionStore::load(captions_jsonl);
  NumberedSummarizer summarizer;
  CaptionDescriptions descriptions(load_allocation(allocation_jsonl), captions, summarizer);

  PrepareOptions options;
  options.min_checkins = data.config.min_length;
  return prepare(parsed.checkins, CategoryAllowlist::food_categories(), postal, geocoder,
                 &descriptions, options, parsed.malformed.size());
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream pois(dir / "pois.jsonl", std::ios::binary);
  for (const auto& [id, meta] : corpus.pois) {
    json attrs = json::array();
    for (const auto& [k, v] : meta.attributes()) attrs.push_back({k, v});
    pois << json{{"venue_id", id}, {"attributes", attrs}}.dump() << '\n';
  }
  std::ofstream seqs(dir / "sequences.jsonl", std::ios::binary);
  for (const auto& s : corpus.sequences) {
    json items = json::array();
    for (const auto& i : s.items) {
      items.push_back({i.venue_id, i.timestamp.time_since_epoch().count()});
    }
    seqs << json{{"user_id", s.user_id}, {"items", items}}.dump() << '\n';
  }
  if (!pois || !seqs) throw Error("cannot write corpus to " + dir.string());
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  auto pois = open_in(dir / "pois.jsonl");
  try {
    while (std::getline(pois, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      std::vector<Attribute> attrs;
      for (const auto& a : j.at("attributes")) {
        attrs.emplace_back(a.at(0).get<std::string>(), a.at(1).get<std::string>());
      }
      const auto id = j.at("venue_id").get<std::string>();
      corpus.pois.emplace(id, PoiMeta(id, std::move(attrs)));
    }
    lineno = 0;
    auto seqs = open_in(dir / "sequences.jsonl");
    while (std::getline(seqs, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      UserSequence s;
      s.user_id = j.at("user_id").get<std::string>();
      for (const auto& i : j.at("items")) {
        s.items.push_back({i.at(0).get<std::string>(),
                           Timestamp(std::chrono::seconds(i.at(1).get<std::int64_t>()))});
      }
      corpus.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), lineno);
  }
  return validate_corpus(corpus, ViolationPolicy::kReject).corpus;
}

}  // namespace poirec
