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

#ifndef POIREC_TEXTREP_HPP_
#define POIREC_TEXTREP_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "poirec/domain.hpp"

namespace poirec {

using TokenId = std::int32_t;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kCls = 1;
inline constexpr TokenId kMask = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kCount = 4;
}  // namespace special

// Lowercases ASCII and splits on whitespace and punctuation; '_' is a word
// character so attribute keys stay whole. CJK ideographs, kana, hangul and
// full-width forms become one token per character.
std::vector<std::string> tokenize(std::string_view text);

// tokenize() joined by single spaces.
std::string normalize_text(std::string_view text);

class Vocab {
 public:
  // Specials only.
  Vocab();

  // `tokens` excludes the specials; token i gets id i + special::kCount.
  explicit Vocab(std::vector<std::string> tokens);

  // One token per line; line n (0-based) is id n + special::kCount.
  static Vocab load(std::istream& in);
  void save(std::ostream& out) const;

  std::size_t size() const { return special::kCount + tokens_.size(); }
  // kUnk for unknown tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(const std::vector<TokenId>& ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

inline constexpr std::size_t kDefaultMinFreq = 2;

// Ranks tokens by frequency (descending) then lexicographically and keeps
// those with count >= min_freq, up to max_vocab ids in total including the
// specials. ConfigError when max_vocab < 5 or `texts` is empty.
Vocab build_vocab(const std::vector<std::string>& texts, std::size_t max_vocab,
                  std::size_t min_freq = kDefaultMinFreq);

// "key value key value ..." in canonical attribute order.
std::string item_text(const PoiMeta& meta);

struct TokenizedItem {
  std::vector<TokenId> token_ids;
  std::vector<TokenId> field_type_ids;  // 0 key, 1 value

  std::size_t size() const { return token_ids.size(); }
  friend bool operator==(const TokenizedItem&, const TokenizedItem&) = default;
};

inline constexpr TokenId kKeyField = 0;
inline constexpr TokenId kValueField = 1;

struct TextBudgets {
  std::size_t per_attribute = 32;
  std::size_t per_sequence = 512;
};

// k1 v1 k2 v2 ... with every value cut to `per_attribute_cap` tokens.
// ValidationError when the meta has no attributes.
TokenizedItem flatten_item(const PoiMeta& meta, const Vocab& vocab,
                           std::size_t per_attribute_cap);

struct ModelInput {
  std::vector<TokenId> token_ids;
  std::vector<TokenId> field_type_ids;
  // 0 for CLS; otherwise the item's recency rank (1 = most recent).
  std::vector<TokenId> item_position_ids;
  std::vector<TokenId> position_ids;

  std::size_t size() const { return token_ids.size(); }
  friend bool operator==(const ModelInput&, const ModelInput&) = default;
};

struct PackedSequence {
  ModelInput input;
  std::size_t items_kept = 0;
  std::size_t items_dropped = 0;
  bool truncated = false;  // the most recent item alone overflowed
};

// Packs chronological items after a CLS token, choosing the most recent
// items that fit in `max_tokens` (CLS included) and dropping older ones
// whole. Kept items stay in chronological order. ValidationError when
// `items` is empty or max_tokens < 2.
PackedSequence pack_sequence(const std::vector<const TokenizedItem*>& items,
                             std::size_t max_tokens);
PackedSequence pack_sequence(const std::vector<TokenizedItem>& items,
                             std::size_t max_tokens);

// Tokenized items of every POI in the corpus, optionally without venue_desc.
std::map<std::string, TokenizedItem> tokenize_pois(
    const std::map<std::string, PoiMeta>& pois, const Vocab& vocab,
    std::size_t per_attribute_cap, bool with_desc);

}  // namespace poirec

#endif  // POIREC_TEXTREP_HPP_
