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
#include <cmath>
#include <set>
#include <tuple>

#include "poirec/error.hpp"

namespace poirec {

bool GeoPoint::valid(double lat, double lon) {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 &&
         lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  if (!valid(lat, lon)) {
    throw ValidationError("coordinate out of range: (" + std::to_string(lat) +
                          ", " + std::to_string(lon) + ")");
  }
}

namespace {

int canonical_rank(std::string_view key) {
  const auto& order = attr::kCanonicalOrder;
  auto it = std::find(order.begin(), order.end(), key);
  return it == order.end() ? -1 : static_cast<int>(it - order.begin());
}

}  // namespace

PoiMeta::PoiMeta(std::string venue_id, std::vector<Attribute> attributes)
    : venue_id_(std::move(venue_id)), attributes_(std::move(attributes)) {
  if (venue_id_.empty()) throw ValidationError("empty venue id");
  std::set<std::string> seen;
  for (const auto& [key, value] : attributes_) {
    if (canonical_rank(key) < 0) {
      throw ValidationError("unknown attribute key '" + key + "' for venue " +
                            venue_id_);
    }
    if (!seen.insert(key).second) {
      throw ValidationError("duplicate attribute key '" + key +
                            "' for venue " + venue_id_);
    }
    if (value.empty()) {
      throw ValidationError("empty value for '" + key + "' of venue " +
                            venue_id_);
    }
  }
  std::stable_sort(attributes_.begin(), attributes_.end(),
                   [](const Attribute& a, const Attribute& b) {
                     return canonical_rank(a.first) < canonical_rank(b.first);
                   });
}

std::optional<std::string> PoiMeta::find(std::string_view key) const {
  for (const auto& [k, v] : attributes_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

PoiMeta PoiMeta::without(std::string_view key) const {
  PoiMeta out = *this;
  std::erase_if(out.attributes_,
                [key](const Attribute& a) { return a.first == key; });
  return out;
}

std::vector<UserSequence> build_sequences(const std::vector<CheckIn>& checkins) {
  std::map<std::string, std::vector<SequenceItem>> by_user;
  for (const auto& c : checkins) {
    by_user[c.user_id].push_back({c.venue_id, c.timestamp_utc});
  }
  std::vector<UserSequence> out;
  out.reserve(by_user.size());
  for (auto& [user, items] : by_user) {
    std::sort(items.begin(), items.end(),
              [](const SequenceItem& a, const SequenceItem& b) {
                return std::tie(a.timestamp, a.venue_id) <
                       std::tie(b.timestamp, b.venue_id);
              });
    out.push_back({user, std::move(items)});
  }
  return out;
}

ValidatedCorpus validate_corpus(const Corpus& corpus, ViolationPolicy policy) {
  ValidatedCorpus result;
  result.corpus.pois = corpus.pois;
  for (const auto& seq : corpus.sequences) {
    UserSequence kept{seq.user_id, {}};
    kept.items.reserve(seq.items.size());
    for (const auto& item : seq.items) {
      if (corpus.pois.contains(item.venue_id)) {
        kept.items.push_back(item);
        continue;
      }
      if (policy == ViolationPolicy::kReject) {
        throw ValidationError("sequence of user " + seq.user_id +
                              " references unknown venue " + item.venue_id);
      }
      ++result.report.dangling_items;
    }
    if (kept.items.size() < kMinSequenceLength) {
      ++result.report.short_sequences;
      continue;
    }
    result.corpus.sequences.push_back(std::move(kept));
  }
  return result;
}

}  // namespace poirec
