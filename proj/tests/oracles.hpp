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

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. They deliberately avoid the library's ranking code.

#ifndef POIREC_TESTS_ORACLES_HPP_
#define POIREC_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "poirec/eval.hpp"
#include "poirec/rank.hpp"

namespace poirec::oracle {

struct Entry {
  std::string id;
  double score;
};

// Full sort, descending score, ascending id.
inline std::vector<Entry> full_sort(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return entries;
}

inline std::size_t rank_of(const std::vector<Entry>& sorted, const std::string& id) {
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].id == id) return i + 1;
  }
  return sorted.size();
}

struct Metrics {
  double ndcg10, ndcg50, recall10, recall50, mrr, auc;
};

inline Metrics metrics(std::size_t r, std::size_t n) {
  const double rd = static_cast<double>(r);
  Metrics m{};
  m.ndcg10 = r <= 10 ? 1.0 / std::log2(rd + 1.0) : 0.0;
  m.ndcg50 = r <= 50 ? 1.0 / std::log2(rd + 1.0) : 0.0;
  m.recall10 = r <= 10 ? 1.0 : 0.0;
  m.recall50 = r <= 50 ? 1.0 : 0.0;
  m.mrr = 1.0 / rd;
  m.auc = n > 1 ? (static_cast<double>(n) - rd) / (static_cast<double>(n) - 1.0) : 1.0;
  return m;
}

inline double max_abs_diff(const Metrics& a, const RankMetrics& b) {
  return std::max({std::abs(a.ndcg10 - b.ndcg10), std::abs(a.ndcg50 - b.ndcg50),
                   std::abs(a.recall10 - b.recall10), std::abs(a.recall50 - b.recall50),
                   std::abs(a.mrr - b.mrr), std::abs(a.auc - b.auc)});
}

// Cosine of the query with every stored index row, accumulated in double.
inline std::vector<Entry> direct_scan(const ItemIndex& index, const Embedding& query) {
  std::vector<Entry> out;
  double qn = 0.0;
  for (Eigen::Index k = 0; k < query.cols(); ++k) qn += double(query(k)) * double(query(k));
  qn = std::sqrt(qn);
  for (std::size_t i = 0; i < index.size(); ++i) {
    double dot = 0.0, vn = 0.0;
    for (Eigen::Index k = 0; k < query.cols(); ++k) {
      const double v = index.vectors()(static_cast<Eigen::Index>(i), k);
      dot += double(query(k)) * v;
      vn += v * v;
    }
    out.push_back({index.ids()[i], dot / (qn * std::sqrt(vn))});
  }
  return full_sort(std::move(out));
}

// Random index with 1..max_n items of dimension `dim`. Components are small
// integers so that exact ties occur.
inline ItemIndex random_index(std::mt19937_64& rng, std::size_t max_n, int dim) {
  std::uniform_int_distribution<std::size_t> size(1, max_n);
  std::uniform_int_distribution<int> comp(-2, 2);
  const std::size_t n = size(rng);
  ItemIndex index(dim);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i));
  std::shuffle(ids.begin(), ids.end(), rng);
  for (const auto& id : ids) {
    Embedding v(dim);
    do {
      for (int k = 0; k < dim; ++k) v(k) = static_cast<float>(comp(rng));
    } while (v.isZero());
    index.add(id, v);
  }
  return index;
}

}  // namespace poirec::oracle

#endif  // POIREC_TESTS_ORACLES_HPP_
