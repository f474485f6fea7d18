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

#include "poirec/rank.hpp"

#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "poirec/error.hpp"

namespace poirec {
namespace {

Embedding random_query(std::mt19937_64& rng, int dim) {
  std::uniform_int_distribution<int> comp(-2, 2);
  Embedding q(dim);
  do {
    for (int k = 0; k < dim; ++k) q(k) = static_cast<float>(comp(rng));
  } while (q.isZero());
  return q;
}

TEST_CASE("ranking agrees with a direct scan on random indexes") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const ItemIndex index = oracle::random_index(rng, 50, 6);
    const Embedding q = random_query(rng, 6);
    const Ranking got = rank_query(q, index);
    const auto want = oracle::direct_scan(index, q);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].venue_id == want[i].id);
      CHECK(std::abs(got[i].score - want[i].score) <= 1e-9);
    }
  }
}

TEST_CASE("top_k is a prefix of the full ranking") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ItemIndex index = oracle::random_index(rng, 40, 4);
    const Embedding q = random_query(rng, 4);
    const Ranking full = rank_query(q, index);
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{10}, std::size_t{100}}) {
      const Ranking top = rank_query(q, index, {k, false});
      REQUIRE(top.size() == std::min(k, full.size()));
      CHECK(Ranking(full.begin(), full.begin() + static_cast<long>(top.size())) == top);
    }
  }
}

TEST_CASE("ties break by ascending venue id") {
  ItemIndex index(2);
  Embedding v(2);
  v << 1.0f, 0.0f;
  index.add("b", v);
  index.add("c", v * 2.0f);
  index.add("a", v);
  Embedding w(2);
  w << 0.0f, 1.0f;
  index.add("0", w);
  const Ranking r = rank_query(v, index);
  CHECK(r[0].venue_id == "a");
  CHECK(r[1].venue_id == "b");
  CHECK(r[2].venue_id == "c");
  CHECK(r[3].venue_id == "0");
}

TEST_CASE("an item's own vector ranks it first and scaling changes nothing") {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> g;
  ItemIndex index(8);
  std::vector<Embedding> vs;
  for (int i = 0; i < 30; ++i) {
    Embedding v(8);
    for (int k = 0; k < 8; ++k) v(k) = g(rng);
    vs.push_back(v);
    index.add("v" + std::to_string(i), v);
  }
  for (int i = 0; i < 30; ++i) {
    const Ranking r = rank_query(vs[static_cast<std::size_t>(i)], index);
    CHECK(r[0].venue_id == "v" + std::to_string(i));
    CHECK(r[0].score == doctest::Approx(1.0).epsilon(1e-6));
    const Ranking scaled = rank_query(vs[static_cast<std::size_t>(i)] * 3.7f, index);
    for (std::size_t k = 0; k < r.size(); ++k) {
      CHECK(scaled[k].venue_id == r[k].venue_id);
      CHECK(std::abs(scaled[k].score - r[k].score) < 1e-6);
    }
  }
}

TEST_CASE("exclude_seen removes history items") {
  std::mt19937_64 rng(1);
  const ItemIndex index = oracle::random_index(rng, 20, 3);
  const Embedding q = random_query(rng, 3);
  const std::set<std::string> seen{index.ids()[0], index.ids()[1]};
  const Ranking r = rank_query(q, index, {std::nullopt, true}, seen);
  CHECK(r.size() == index.size() - 2);
  for (const auto& s : r) CHECK(seen.count(s.venue_id) == 0);
  CHECK(rank_query(q, index, {std::nullopt, false}, seen).size() == index.size());
}

TEST_CASE("index validation") {
  ItemIndex index(2);
  Embedding v(2);
  v << 3.0f, 4.0f;
  index.add("a", v);
  CHECK(index.vectors().row(0).norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(index.add("a", v), ValidationError);
  CHECK_THROWS_AS(index.add("z", Embedding::Zero(2)), ValidationError);
  CHECK_THROWS_AS(index.add("w", Embedding::Ones(3)), ValidationError);
  CHECK(index.find("a") == 0);
  CHECK(index.find("q") == -1);
  CHECK_THROWS_AS(rank_query(v, ItemIndex(2)), ValidationError);
}

TEST_CASE("index files round trip and detect corruption") {
  std::mt19937_64 rng(77);
  const ItemIndex index = oracle::random_index(rng, 30, 5);
  std::stringstream buf;
  save_index(index, buf);
  const std::string bytes = buf.str();
  std::istringstream in(bytes);
  CHECK(load_index(in) == index);

  std::string bad = bytes;
  bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x10);
  std::istringstream corrupt(bad);
  CHECK_THROWS_AS(load_index(corrupt), Error);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_index(truncated), Error);
}

TEST_CASE("rank encodes the prefix with the model") {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_tokens = 32;
  c.max_items = 4;
  c.seed = 4;
  const auto params = ModelParams<float>::init(c);
  std::map<std::string, TokenizedItem> items;
  for (int i = 0; i < 12; ++i) {
    TokenizedItem t;
    t.token_ids = {4, static_cast<TokenId>(5 + i), static_cast<TokenId>(5 + (i * 7) % 15)};
    t.field_type_ids = {kKeyField, kValueField, kValueField};
    items.emplace("v" + std::to_string(i), t);
  }
  const ItemIndex index = build_index(items, params);
  CHECK(index.size() == 12);
  CHECK(build_index(items, params, 3) == index);

  const std::vector<std::string> prefix{"v3", "v7"};
  const Ranking r = rank(prefix, items, index, params);
  const Embedding q = encode_prefix({&items.at("v3"), &items.at("v7")}, params);
  CHECK(r == rank_query(q, index));
  CHECK(rank(prefix, items, index, params) == r);
  CHECK(rank({"v3"}, items, index, params, {5, false}).size() == 5);
  CHECK_THROWS_AS(rank({"nope"}, items, index, params), LookupMiss);
  CHECK_THROWS_AS(rank({}, items, index, params), ValidationError);
}

}  // namespace
}  // namespace poirec
