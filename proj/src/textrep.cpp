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

#include "poirec/textrep.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "poirec/error.hpp"

namespace poirec {

namespace {

// Decodes one UTF-8 sequence starting at s[i]; returns its length and
// stores the code point (or the raw byte for invalid input).
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t n = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3
                : (b >> 3) == 0x1E ? 4 : 0;
  if (n == 0 || i + n > s.size()) {
    cp = b;
    return 1;
  }
  cp = n == 1 ? b : n == 2 ? (b & 0x1F) : n == 3 ? (b & 0x0F) : (b & 0x07);
  for (std::size_t k = 1; k < n; ++k) {
    const auto c = static_cast<unsigned char>(s[i + k]);
    if ((c & 0xC0) != 0x80) {
      cp = b;
      return 1;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  return n;
}

bool is_wide_punctuation(char32_t cp) {
  return (cp >= 0x3000 && cp <= 0x303F && cp != 0x3005) ||
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65);
}

bool is_wide(char32_t cp) {
  return (cp >= 0x2E80 && cp <= 0x9FFF) || (cp >= 0xAC00 && cp <= 0xD7AF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0xFF00 && cp <= 0xFFEF) ||
         (cp >= 0x20000 && cp <= 0x3FFFF);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp;
    const std::size_t n = decode_utf8(text, i, cp);
    if (cp < 0x80 && n == 1) {
      const char c = static_cast<char>(cp);
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') {
        word.push_back(c);
      } else if (c >= 'A' && c <= 'Z') {
        word.push_back(static_cast<char>(c - 'A' + 'a'));
      } else {
        flush();
      }
    } else if (is_wide_punctuation(cp)) {
      flush();
    } else if (is_wide(cp)) {
      flush();
      out.emplace_back(text.substr(i, n));
    } else {
      word.append(text.substr(i, n));
    }
    i += n;
  }
  flush();
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------

Vocab::Vocab() = default;

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw ValidationError("invalid vocabulary token '" + t + "'");
    }
    if (!ids_.emplace(t, static_cast<TokenId>(i) + special::kCount).second) {
      throw ValidationError("duplicate vocabulary token '" + t + "'");
    }
  }
}

Vocab Vocab::load(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? special::kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

const std::string& Vocab::token(TokenId id) const {
  static const std::string kSpecials[] = {"[PAD]", "[CLS]", "[MASK]", "[UNK]"};
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw InputError("token id " + std::to_string(id) + " out of range");
  }
  if (id < special::kCount) return kSpecials[id];
  return tokens_[static_cast<std::size_t>(id - special::kCount)];
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& t : tokenize(text)) out.push_back(id(t));
  return out;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

Vocab build_vocab(const std::vector<std::string>& texts, std::size_t max_vocab,
                  std::size_t min_freq) {
  if (max_vocab < special::kCount + 1) {
    throw ConfigError("max_vocab must be at least 5");
  }
  if (texts.empty()) throw ConfigError("cannot build a vocabulary from no text");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& t : tokenize(text)) ++counts[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [t, n] : counts) {
    if (n >= std::max<std::size_t>(min_freq, 1)) ranked.emplace_back(t, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_vocab - special::kCount);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
  return Vocab(std::move(tokens));
}

std::string item_text(const PoiMeta& meta) {
  std::string out;
  for (const auto& [k, v] : meta.attributes()) {
    if (!out.empty()) out.push_back(' ');
    out += k + " " + v;
  }
  return out;
}

// ---------------------------------------------------------------------------

TokenizedItem flatten_item(const PoiMeta& meta, const Vocab& vocab,
                           std::size_t per_attribute_cap) {
  if (meta.attributes().empty()) {
    throw ValidationError("venue " + meta.venue_id() + " has no attributes");
  }
  TokenizedItem item;
  for (const auto& [key, value] : meta.attributes()) {
    item.token_ids.push_back(vocab.id(key));
    item.field_type_ids.push_back(kKeyField);
    const auto ids = vocab.encode(value);
    const std::size_t n = std::min(ids.size(), per_attribute_cap);
    item.token_ids.insert(item.token_ids.end(), ids.begin(), ids.begin() + n);
    item.field_type_ids.insert(item.field_type_ids.end(), n, kValueField);
  }
  return item;
}

PackedSequence pack_sequence(const std::vector<const TokenizedItem*>& items,
                             std::size_t max_tokens) {
  if (items.empty()) throw ValidationError("cannot pack an empty sequence");
  if (max_tokens < 2) throw ValidationError("sequence budget must be >= 2");
  const std::size_t budget = max_tokens - 1;

  // Walk back from the most recent item.
  std::size_t used = 0, first = items.size();
  while (first > 0 && used + items[first - 1]->size() <= budget) {
    used += items[first - 1]->size();
    --first;
  }
  PackedSequence out;
  std::size_t last_len = items.back()->size();
  if (first == items.size()) {
    out.truncated = true;
    first = items.size() - 1;
    last_len = budget;
  }
  out.items_kept = items.size() - first;
  out.items_dropped = first;

  ModelInput& in = out.input;
  in.token_ids.push_back(special::kCls);
  in.field_type_ids.push_back(kKeyField);
  in.item_position_ids.push_back(0);
  for (std::size_t i = first; i < items.size(); ++i) {
    const TokenizedItem& it = *items[i];
    const std::size_t n = i + 1 == items.size() ? std::min(it.size(), last_len)
                                                : it.size();
    const auto rank = static_cast<TokenId>(items.size() - i);
    in.token_ids.insert(in.token_ids.end(), it.token_ids.begin(),
                        it.token_ids.begin() + n);
    in.field_type_ids.insert(in.field_type_ids.end(), it.field_type_ids.begin(),
                             it.field_type_ids.begin() + n);
    in.item_position_ids.insert(in.item_position_ids.end(), n, rank);
  }
  in.position_ids.resize(in.token_ids.size());
  for (std::size_t i = 0; i < in.position_ids.size(); ++i) {
    in.position_ids[i] = static_cast<TokenId>(i);
  }
  return out;
}

PackedSequence pack_sequence(const std::vector<TokenizedItem>& items,
                             std::size_t max_tokens) {
  std::vector<const TokenizedItem*> ptrs;
  for (const auto& it : items) ptrs.push_back(&it);
  return pack_sequence(ptrs, max_tokens);
}

std::map<std::string, TokenizedItem> tokenize_pois(
    const std::map<std::string, PoiMeta>& pois, const Vocab& vocab,
    std::size_t per_attribute_cap, bool with_desc) {
  std::map<std::string, TokenizedItem> out;
  for (const auto& [id, meta] : pois) {
    out.emplace(id, flatten_item(with_desc ? meta : meta.without(attr::kDesc),
                                 vocab, per_attribute_cap));
  }
  return out;
}

}  // namespace poirec
