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

#ifndef POIREC_RANK_HPP_
#define POIREC_RANK_HPP_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "poirec/model.hpp"
#include "poirec/textrep.hpp"

namespace poirec {

using Embedding = Eigen::Matrix<float, 1, Eigen::Dynamic>;

// venue_id -> unit embedding, in insertion order.
class ItemIndex {
 public:
  explicit ItemIndex(int dim = 0) : dim_(dim) {}

  // Normalizes `v`. Throws ValidationError for duplicate ids, wrong
  // dimension, or a zero vector.
  void add(const std::string& venue_id, const Embedding& v);

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  // N x dim, one unit row per venue.
  const Matrix<float>& vectors() const { return vectors_; }
  // Position of a venue, or -1.
  long find(const std::string& venue_id) const;

  friend bool operator==(const ItemIndex& a, const ItemIndex& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.vectors_ == b.vectors_;
  }

 private:
  int dim_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, long> pos_;
  Matrix<float> vectors_;
};

// Encodes every item (ordered by venue id). `threads` only affects speed.
ItemIndex build_index(const std::map<std::string, TokenizedItem>& items,
                      const ModelParams<float>& params, int threads = 1);

// Index file: "PRIX", version, dim, count, then per record a length-prefixed
// UTF-8 id and dim float32 values, little-endian, FNV-1a checksum.
void save_index(const ItemIndex& index, std::ostream& out);
ItemIndex load_index(std::istream& in);

struct Scored {
  std::string venue_id;
  double score = 0.0;
  friend bool operator==(const Scored&, const Scored&) = default;
};

// Descending score, ties by ascending venue id.
using Ranking = std::vector<Scored>;

struct RankOptions {
  std::optional<std::size_t> top_k;
  bool exclude_seen = false;
};

// Cosine scores of every indexed item against a query vector (any norm).
std::vector<double> cosine_scores(const ItemIndex& index, const Embedding& query);

// Ranks the index against a query; `seen` is honored with exclude_seen.
// ValidationError when the index is empty.
Ranking rank_query(const Embedding& query, const ItemIndex& index,
                   const RankOptions& options = {},
                   const std::set<std::string>& seen = {});

// Pooled embedding of a check-in prefix (oldest first).
Embedding encode_prefix(const std::vector<const TokenizedItem*>& prefix,
                        const ModelParams<float>& params);

// Encodes the prefix and ranks the index. ValidationError for an empty
// prefix or index.
Ranking rank(const std::vector<std::string>& prefix,
             const std::map<std::string, TokenizedItem>& items,
             const ItemIndex& index, const ModelParams<float>& params,
             const RankOptions& options = {});

}  // namespace poirec

#endif  // POIREC_RANK_HPP_
