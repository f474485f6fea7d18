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

#include <random>
#include <sstream>

#include "doctest.h"
#include "poirec/error.hpp"

namespace poirec {
namespace {

using Tokens = std::vector<std::string>;

TEST_CASE("tokenizer") {
  CHECK(tokenize("French Restaurant") == Tokens{"french", "restaurant"});
  CHECK(tokenize("venue_category") == Tokens{"venue_category"});
  CHECK(tokenize("Ramen /  Noodle House") == Tokens{"ramen", "noodle", "house"});
  CHECK(tokenize("新宿区") == Tokens{"新", "宿", "区"});
  CHECK(tokenize("新宿区 882f5a3751fffff") ==
        Tokens{"新", "宿", "区", "882f5a3751fffff"});
  CHECK(tokenize("Café, Bar!") == Tokens{"café", "bar"});
  CHECK(tokenize("ラーメン、つけ麺。") ==
        Tokens{"ラ", "ー", "メ", "ン", "つ", "け", "麺"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("vocabulary construction") {
  const Vocab v = build_vocab({"ramen ramen soup"}, 100, 1);
  CHECK(v.size() == 6);
  CHECK(v.id("ramen") == 4);
  CHECK(v.id("soup") == 5);
  CHECK(v.contains("ramen"));

  const Vocab f = build_vocab({"ramen ramen soup"}, 100, 2);
  CHECK(f.contains("ramen"));
  CHECK_FALSE(f.contains("soup"));
  CHECK(f.id("soup") == special::kUnk);

  // Ties ranked lexicographically; max_vocab caps the total size.
  const Vocab t = build_vocab({"b a c", "c b a"}, 6, 1);
  CHECK(t.size() == 6);
  CHECK(t.token(4) == "a");
  CHECK(t.token(5) == "b");

  CHECK_THROWS_AS(build_vocab({"a"}, 4, 1), ConfigError);
  CHECK_THROWS_AS(build_vocab({}, 100, 1), ConfigError);
  CHECK(special::kPad != special::kCls);
  CHECK(t.token(special::kMask) == "[MASK]");
}

TEST_CASE("vocabulary file round trip and decode") {
  const Vocab v = build_vocab({"新宿区 ramen soup", "ramen udon"}, 100, 1);
  std::stringstream io;
  v.save(io);
  const Vocab back = Vocab::load(io);
  CHECK(back == v);
  for (std::size_t id = special::kCount; id < v.size(); ++id) {
    const auto t = static_cast<TokenId>(id);
    CHECK(back.id(v.token(t)) == t);
  }
  const std::string text = "Ramen, SOUP & udon 新宿区";
  CHECK(v.decode(v.encode(text)) == normalize_text(text));
  CHECK_THROWS_AS(v.token(1000), InputError);
}

Vocab item_vocab() {
  return build_vocab({"venue_category venue_name venue_desc venue_area venue_types "
                      "french restaurant jiro ramen noodle soup food"},
                     1000, 1);
}

TEST_CASE("flatten_item") {
  const Vocab v = item_vocab();
  const TokenizedItem it =
      flatten_item(PoiMeta("v", {{"venue_category", "French Restaurant"}}), v, 32);
  CHECK(v.decode(it.token_ids) == "venue_category french restaurant");
  CHECK(it.field_type_ids == std::vector<TokenId>{0, 1, 1});

  std::string long_value;
  for (int i = 0; i < 1000; ++i) long_value += "ramen ";
  const TokenizedItem cut = flatten_item(PoiMeta("v", {{"venue_desc", long_value}}), v, 32);
  CHECK(cut.size() == 33);

  const PoiMeta a("v", {{"venue_name", "Jiro"}, {"venue_category", "Ramen"}});
  const PoiMeta b("v", {{"venue_category", "Ramen"}, {"venue_name", "Jiro"}});
  CHECK(flatten_item(a, v, 32) == flatten_item(b, v, 32));
  CHECK_THROWS_AS(flatten_item(PoiMeta(), v, 32), ValidationError);
}

TEST_CASE("removing venue_desc removes every description token") {
  const PoiMeta m("v", {{"venue_category", "Ramen"},
                        {"venue_desc", "1. Noodle soup with pork. 2. Gyoza."},
                        {"venue_types", "food"}});
  const Vocab v = build_vocab({item_text(m)}, 1000, 1);
  const auto without = tokenize_pois({{"v", m}}, v, 32, false).at("v");
  const std::string text = v.decode(without.token_ids);
  for (const auto& t : tokenize("Noodle soup with pork Gyoza")) {
    CHECK(text.find(t) == std::string::npos);
  }
  CHECK(text == "venue_category ramen venue_types food");
}

TokenizedItem filler(std::size_t n, TokenId tok) {
  TokenizedItem it;
  it.token_ids.assign(n, tok);
  it.field_type_ids.assign(n, kValueField);
  return it;
}

TEST_CASE("pack_sequence") {
  const auto one = pack_sequence({filler(5, 7)}, 512);
  CHECK(one.input.size() == 6);
  CHECK(one.input.token_ids[0] == special::kCls);
  CHECK(one.input.item_position_ids == std::vector<TokenId>{0, 1, 1, 1, 1, 1});

  const auto two = pack_sequence({filler(6, 7), filler(6, 8)}, 10);
  CHECK(two.items_kept == 1);
  CHECK(two.items_dropped == 1);
  CHECK(two.input.token_ids[1] == 8);
  CHECK(two.input.size() == 7);

  const auto three = pack_sequence({filler(2, 5), filler(3, 6), filler(1, 7)}, 100);
  CHECK(three.input.token_ids == std::vector<TokenId>{1, 5, 5, 6, 6, 6, 7});
  CHECK(three.input.item_position_ids == std::vector<TokenId>{0, 3, 3, 2, 2, 2, 1});
  CHECK(three.input.position_ids == std::vector<TokenId>{0, 1, 2, 3, 4, 5, 6});
  CHECK(pack_sequence({filler(2, 5), filler(3, 6), filler(1, 7)}, 100).input ==
        three.input);

  const auto over = pack_sequence({filler(3, 5), filler(50, 6)}, 10);
  CHECK(over.truncated);
  CHECK(over.input.size() == 10);

  CHECK_THROWS_AS(pack_sequence(std::vector<TokenizedItem>{}, 10), ValidationError);
}

TEST_CASE("packing never exceeds the budget") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenizedItem> items;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) items.push_back(filler(1 + rng() % 40, 9));
    const std::size_t budget = 2 + rng() % 200;
    const auto p = pack_sequence(items, budget);
    CHECK(p.input.size() <= budget);
    CHECK(p.items_kept + p.items_dropped == items.size());
    for (std::size_t i = 2; i < p.input.size(); ++i) {
      CHECK(p.input.item_position_ids[i] <= p.input.item_position_ids[i - 1]);
    }
    CHECK(p.input.item_position_ids.back() == 1);
  }
}

}  // namespace
}  // namespace poirec
