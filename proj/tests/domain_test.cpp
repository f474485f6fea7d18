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

#include "poirec/domain.hpp"

#include <algorithm>
#include <random>

#include "doctest.h"
#include "poirec/error.hpp"

namespace poirec {
namespace {

CheckIn make(std::string user, std::string venue, long long t) {
  CheckIn c;
  c.user_id = std::move(user);
  c.venue_id = std::move(venue);
  c.category_id = "cat";
  c.category_name = "Ramen /  Noodle House";
  c.geo = GeoPoint(35.0, 139.0);
  c.timestamp_utc = Timestamp(std::chrono::seconds(t));
  return c;
}

std::vector<std::string> venues(const UserSequence& s) {
  std::vector<std::string> out;
  for (const auto& i : s.items) out.push_back(i.venue_id);
  return out;
}

TEST_CASE("GeoPoint enforces ranges") {
  CHECK_NOTHROW(GeoPoint(90.0, -180.0));
  CHECK_THROWS_AS(GeoPoint(95.0, 0.0), ValidationError);
  CHECK_THROWS_AS(GeoPoint(0.0, -180.5), ValidationError);
  CHECK_THROWS_AS(GeoPoint(std::numeric_limits<double>::infinity(), 0.0),
                  ValidationError);
}

TEST_CASE("build_sequences sorts per user") {
  const auto seqs =
      build_sequences({make("u", "c", 30), make("u", "a", 10), make("u", "b", 20)});
  REQUIRE(seqs.size() == 1);
  CHECK(venues(seqs[0]) == std::vector<std::string>{"a", "b", "c"});
  CHECK(build_sequences({}).empty());
}

TEST_CASE("equal timestamps break ties by venue id") {
  const auto seqs = build_sequences({make("u", "b", 5), make("u", "a", 5)});
  CHECK(venues(seqs[0]) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("build_sequences is permutation invariant and keeps every check-in") {
  std::vector<CheckIn> checkins;
  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    checkins.push_back(make("u" + std::to_string(rng() % 7),
                            "v" + std::to_string(rng() % 13), rng() % 50));
  }
  const auto reference = build_sequences(checkins);
  std::size_t total = 0;
  for (const auto& s : reference) total += s.items.size();
  CHECK(total == checkins.size());
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(checkins.begin(), checkins.end(), rng);
    CHECK(build_sequences(checkins) == reference);
  }
}

TEST_CASE("PoiMeta canonicalizes and validates attributes") {
  const PoiMeta m("v1", {{"venue_types", "food"},
                         {"venue_name", "Jiro"},
                         {"venue_category", "Ramen /  Noodle House"}});
  REQUIRE(m.attributes().size() == 3);
  CHECK(m.attributes()[0].first == "venue_category");
  CHECK(m.attributes()[1].first == "venue_name");
  CHECK(m.attributes()[2].first == "venue_types");
  CHECK(m.find("venue_name") == "Jiro");
  CHECK_FALSE(m.find("venue_desc").has_value());
  CHECK(m.without("venue_name").attributes().size() == 2);

  CHECK_THROWS_AS(PoiMeta("v", {{"colour", "red"}}), ValidationError);
  CHECK_THROWS_AS(PoiMeta("v", {{"venue_name", "a"}, {"venue_name", "b"}}),
                  ValidationError);
  CHECK_THROWS_AS(PoiMeta("v", {{"venue_name", ""}}), ValidationError);
  CHECK_THROWS_AS(PoiMeta("", {{"venue_name", "a"}}), ValidationError);
}

Corpus small_corpus() {
  Corpus c;
  for (const char* id : {"a", "b", "c"}) {
    c.pois.emplace(id, PoiMeta(id, {{"venue_name", std::string("n") + id}}));
  }
  c.sequences = build_sequences({make("u1", "a", 1), make("u1", "b", 2),
                                 make("u1", "c", 3), make("u2", "a", 1),
                                 make("u2", "b", 2)});
  return c;
}

TEST_CASE("validate_corpus identity on consistent corpus") {
  const Corpus c = small_corpus();
  const auto r = validate_corpus(c, ViolationPolicy::kReject);
  CHECK(r.corpus == c);
  CHECK(r.report.empty());
}

TEST_CASE("validate_corpus drops dangling items and short sequences") {
  Corpus c = small_corpus();
  c.sequences[0].items[1].venue_id = "zzz";  // u1: a zzz c
  c.sequences[1].items[0].venue_id = "yyy";  // u2: yyy b -> length 1
  const auto r = validate_corpus(c, ViolationPolicy::kDrop);
  CHECK(r.report.dangling_items == 2);
  CHECK(r.report.short_sequences == 1);
  REQUIRE(r.corpus.sequences.size() == 1);
  CHECK(venues(r.corpus.sequences[0]) == std::vector<std::string>{"a", "c"});

  CHECK_THROWS_WITH_AS(validate_corpus(c, ViolationPolicy::kReject),
                       doctest::Contains("zzz"), ValidationError);

  // Idempotent.
  const auto again = validate_corpus(r.corpus, ViolationPolicy::kDrop);
  CHECK(again.corpus == r.corpus);
  CHECK(again.report.empty());
}

}  // namespace
}  // namespace poirec
