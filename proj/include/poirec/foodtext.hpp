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

#ifndef POIREC_FOODTEXT_HPP_
#define POIREC_FOODTEXT_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace poirec {

// Collapses whitespace runs to one space and trims, so that
// "Ramen /  Noodle House" and "Ramen / Noodle House" compare equal.
std::string normalize_category(std::string_view name);

// Venue category -> food image classes.
class ClassMapping {
 public:
  inline static constexpr std::size_t kMaxCategoriesPerClass = 3;

  // Throws ConfigError when a class sits under more than three categories
  // or a category has no classes.
  explicit ClassMapping(std::map<std::string, std::vector<std::string>> entries);

  // The 30-category, 106-class mapping between Foursquare categories and
  // FoodX-251 classes.
  static ClassMapping builtin();

  // Comma-separated (venue_category, image_class) rows; an optional header
  // row "venue_category,image_class" is skipped.
  static ClassMapping load(std::istream& in);

  // Classes for a category (whitespace-insensitive); empty when unmapped.
  const std::vector<std::string>& classes_for(std::string_view category) const;

  std::vector<std::string> categories() const;
  std::vector<std::string> distinct_classes() const;
  const std::map<std::string, std::vector<std::string>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;  // normalized keys
};

// image_id -> caption text. JSON Lines of {"image_id": .., "caption": ..}.
class CaptionStore {
 public:
  static CaptionStore load(std::istream& in);

  // Throws ValidationError for empty captions.
  void add(std::string image_id, std::string caption);
  bool contains(std::string_view image_id) const;
  // Throws LookupMiss.
  const std::string& at(std::string_view image_id) const;
  std::size_t size() const { return captions_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> captions_;
};

using ClassImages = std::map<std::string, std::vector<std::string>>;

struct Pool {
  std::vector<std::string> image_ids;
  // Set when the category's images were fewer than the requested size and
  // the remainder was drawn with replacement.
  bool with_replacement = false;
};

inline constexpr std::size_t kMinPoolSize = 100;

// Samples max(poi_count, 100) images from the union of the category's
// classes. ConfigError when the category maps to no class or no image.
Pool sample_pool(const ClassMapping& mapping, std::string_view category,
                 const ClassImages& class_images, std::size_t poi_count,
                 std::uint64_t seed);

using Allocation = std::map<std::string, std::vector<std::string>>;

inline constexpr std::size_t kImagesPerPoi = 8;

// Gives each POI k distinct images drawn uniformly from the distinct ids of
// `pool`; ValidationError when fewer than k are available.
Allocation allocate(const std::vector<std::string>& pois,
                    const std::vector<std::string>& pool,
                    std::size_t k = kImagesPerPoi, std::uint64_t seed = 0);

// Allocation files: JSON Lines of {"venue_id": .., "image_ids": [..]}.
Allocation load_allocation(std::istream& in);
void save_allocation(const Allocation& allocation, std::ostream& out);

// "1. c1 2. c2 ... n. cn"
std::string combine_captions(const std::vector<std::string>& captions);

class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string summarize(const std::vector<std::string>& captions) = 0;
};

// Numbered concatenation cut to at most `budget` bytes (never inside a
// UTF-8 sequence).
class NumberedSummarizer : public Summarizer {
 public:
  inline static constexpr std::size_t kDefaultBudget = 800;

  explicit NumberedSummarizer(std::size_t budget = kDefaultBudget)
      : budget_(budget) {}
  std::string summarize(const std::vector<std::string>& captions) override;

 private:
  std::size_t budget_;
};

// Exchange with an external summarizer. Requests are the combined caption
// records, one per line; the summarizer answers with one summary per line in
// the same order. Both files are UTF-8.
//
// The reference prompt for the external model is
//   "Summarise the following descriptions of dishes served at a restaurant
//    in 100 words:"
// followed by the combined record; captions were produced per image with
//   "Please describe briefly what you see in the picture."
void write_summary_requests(const std::vector<std::string>& combined,
                            std::ostream& out);
std::vector<std::string> read_summaries(std::istream& in, std::size_t expected);

// Serves summaries produced externally, keyed by combined caption record.
class PrecomputedSummarizer : public Summarizer {
 public:
  PrecomputedSummarizer(const std::vector<std::string>& combined,
                        const std::vector<std::string>& summaries);
  // Throws LookupMiss for records that were not summarized.
  std::string summarize(const std::vector<std::string>& captions) override;

 private:
  std::map<std::string, std::string> by_record_;
};

// Throws LookupMiss naming every image id missing from `store`.
std::string assemble_description(const std::vector<std::string>& image_ids,
                                 const CaptionStore& store,
                                 Summarizer& summarizer);

// Ready-made descriptions, JSON Lines of {"venue_id": .., "venue_desc": ..}.
std::map<std::string, std::string> load_descriptions(std::istream& in);

}  // namespace poirec

#endif  // POIREC_FOODTEXT_HPP_
