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

#ifndef POIREC_PIPELINE_HPP_
#define POIREC_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poirec/domain.hpp"
#include "poirec/foodtext.hpp"
#include "poirec/geospatial.hpp"
#include "poirec/ingest.hpp"
#include "poirec/synth.hpp"

namespace poirec {

// Source of venue_desc values. Returns std::nullopt when a venue has none;
// may throw LookupMiss for incomplete inputs.
class DescriptionProvider {
 public:
  virtual ~DescriptionProvider() = default;
  virtual std::optional<std::string> describe(const std::string& venue_id) = 0;
};

class ReadyDescriptions : public DescriptionProvider {
 public:
  explicit ReadyDescriptions(std::map<std::string, std::string> descriptions)
      : descriptions_(std::move(descriptions)) {}
  std::optional<std::string> describe(const std::string& venue_id) override;

 private:
  std::map<std::string, std::string> descriptions_;
};

// Summaries of the captions of each venue's allocated images.
class CaptionDescriptions : public DescriptionProvider {
 public:
  CaptionDescriptions(Allocation allocation, const CaptionStore& captions,
                      Summarizer& summarizer)
      : allocation_(std::move(allocation)), captions_(captions), summarizer_(summarizer) {}
  std::optional<std::string> describe(const std::string& venue_id) override;

 private:
  Allocation allocation_;
  const CaptionStore& captions_;
  Summarizer& summarizer_;
};

// Image classes: "image_id,image_class" rows with an optional header.
ClassImages load_class_images(std::istream& in);

// Per category: samples a pool and gives each of its venues kImagesPerPoi
// images. Venues of unmapped categories get no allocation.
Allocation allocate_by_category(
    const ClassMapping& mapping, const ClassImages& class_images,
    const std::map<std::string, std::vector<std::string>>& venues_by_category,
    std::uint64_t seed);

struct StageCount {
  std::string stage;
  std::size_t users = 0;
  std::size_t checkins = 0;
  std::size_t pois = 0;

  friend bool operator==(const StageCount&, const StageCount&) = default;
};

struct PrepareReport {
  std::size_t malformed_lines = 0;
  std::vector<StageCount> stages;
  std::map<std::string, std::size_t> dropped_venues;  // reason -> count
  std::size_t venues_without_desc = 0;
  double mean_desc_chars = 0.0;  // code points, over venues with a desc

  const StageCount& stage(const std::string& name) const;
  std::string to_json() const;
};

struct PrepareOptions {
  std::size_t min_checkins = 100;
  CellOptions cell;
};

struct PrepareResult {
  Corpus corpus;
  PrepareReport report;
};

// Category filter, then loyalty filter, then per-venue geocoding, geokey and
// description, then sequences. Venues whose address, municipality or place
// cannot be resolved are dropped together with their check-ins; the reasons
// are counted in the report.
PrepareResult prepare(const std::vector<CheckIn>& checkins,
                      const CategoryAllowlist& allowlist, const PostalTable& postal,
                      GeocoderClient& geocoder, DescriptionProvider* descriptions,
                      const PrepareOptions& options = {},
                      std::size_t malformed_lines = 0);

// Runs prepare over the files of a generated corpus read back through the
// ingest parsers. The loyalty threshold is the configured minimum length.
PrepareResult prepare_synth(const SynthData& data);

// Corpus directory: pois.jsonl and sequences.jsonl.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace poirec

#endif  // POIREC_PIPELINE_HPP_
