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

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "poirec/error.hpp"
#include "poirec/parallel.hpp"

namespace poirec {

void ItemIndex::add(const std::string& venue_id, const Embedding& v) {
  if (dim_ == 0 && ids_.empty()) dim_ = static_cast<int>(v.size());
  if (v.size() != dim_) throw ValidationError("embedding dimension mismatch");
  const double norm = v.cast<double>().norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("cannot index a zero or non-finite vector for " + venue_id);
  }
  if (!pos_.emplace(venue_id, static_cast<long>(ids_.size())).second) {
    throw ValidationError("duplicate venue id in index: " + venue_id);
  }
  ids_.push_back(venue_id);
  vectors_.conservativeResize(static_cast<Eigen::Index>(ids_.size()), dim_);
  vectors_.row(vectors_.rows() - 1) = (v.cast<double>() / norm).cast<float>();
}

long ItemIndex::find(const std::string& venue_id) const {
  const auto it = pos_.find(venue_id);
  return it == pos_.end() ? -1 : it->second;
}

ItemIndex build_index(const std::map<std::string, TokenizedItem>& items,
                      const ModelParams<float>& params, int threads) {
  std::vector<const std::pair<const std::string, TokenizedItem>*> entries;
  for (const auto& e : items) entries.push_back(&e);
  std::vector<Embedding> vecs(entries.size());
  parallel_for(entries.size(), threads,
               [&](std::size_t i) { vecs[i] = encode_item(params, entries[i]->second); });
  ItemIndex index(params.config.d_model);
  for (std::size_t i = 0; i < entries.size(); ++i) index.add(entries[i]->first, vecs[i]);
  return index;
}

namespace {
constexpr char kIndexMagic[4] = {'P', 'R', 'I', 'X'};
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void save_index(const ItemIndex& index, std::ostream& out) {
  HashingWriter w(out);
  w.bytes(kIndexMagic, 4);
  w.u32(kIndexVersion);
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u64(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::string& id = index.ids()[i];
    w.u32(static_cast<std::uint32_t>(id.size()));
    w.bytes(id.data(), id.size());
    const auto row = index.vectors().row(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < row.size(); ++j) w.f32(row(j));
  }
  const std::uint64_t h = w.hash();
  HashingWriter(out).u64(h);
  if (!out) throw IoError("failed to write index");
}

ItemIndex load_index(std::istream& in) {
  HashingReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kIndexMagic, 4) != 0) throw IoError("not an index file");
  if (r.u32() != kIndexVersion) throw IoError("unsupported index version");
  const int dim = static_cast<int>(r.u32());
  const std::uint64_t count = r.u64();
  if (dim <= 0 || dim > 1 << 16) throw IoError("corrupt index header");
  ItemIndex index(dim);
  Embedding v(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    if (len > 1 << 20) throw IoError("corrupt index record");
    std::string id(len, '\0');
    r.bytes(id.data(), len);
    for (int j = 0; j < dim; ++j) v(j) = r.f32();
    index.add(id, v);
  }
  const std::uint64_t expected = r.hash();
  if (r.u64(false) != expected) throw IoError("index checksum mismatch");
  return index;
}

// ---------------------------------------------------------------------------

std::vector<double> cosine_scores(const ItemIndex& index, const Embedding& query) {
  if (query.size() != index.dim()) throw ValidationError("query dimension mismatch");
  const Eigen::VectorXd q = query.cast<double>().transpose();
  double qn = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) qn += q(j) * q(j);
  qn = std::sqrt(qn);
  if (!(qn > 0.0)) throw ValidationError("zero query vector");
  std::vector<double> scores(index.size());
  const Matrix<float>& m = index.vectors();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = 0.0, n = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = static_cast<double>(m(i, j));
      s += v * q(j);
      n += v * v;
    }
    scores[static_cast<std::size_t>(i)] = s / (qn * std::sqrt(n));
  }
  return scores;
}

Ranking rank_query(const Embedding& query, const ItemIndex& index,
                   const RankOptions& options, const std::set<std::string>& seen) {
  if (index.empty()) throw ValidationError("cannot rank against an empty index");
  const auto scores = cosine_scores(index, query);
  Ranking out;
  out.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (options.exclude_seen && seen.count(index.ids()[i]) != 0) continue;
    out.push_back({index.ids()[i], scores[i]});
  }
  const auto before = [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.venue_id < b.venue_id;
  };
  if (options.top_k && *options.top_k < out.size()) {
    const auto k = static_cast<std::ptrdiff_t>(*options.top_k);
    std::partial_sort(out.begin(), out.begin() + k, out.end(), before);
    out.resize(*options.top_k);
  } else {
    std::sort(out.begin(), out.end(), before);
  }
  return out;
}

Embedding encode_prefix(const std::vector<const TokenizedItem*>& prefix,
                        const ModelParams<float>& params) {
  if (prefix.empty()) throw ValidationError("cannot encode an empty prefix");
  const auto packed =
      pack_sequence(prefix, static_cast<std::size_t>(params.config.max_tokens));
  return forward(params, packed.input).pooled;
}

Ranking rank(const std::vector<std::string>& prefix,
             const std::map<std::string, TokenizedItem>& items, const ItemIndex& index,
             const ModelParams<float>& params, const RankOptions& options) {
  std::vector<const TokenizedItem*> seq;
  for (const auto& id : prefix) {
    const auto it = items.find(id);
    if (it == items.end()) throw LookupMiss("unknown venue in prefix: " + id);
    seq.push_back(&it->second);
  }
  return rank_query(encode_prefix(seq, params), index, options,
                    std::set<std::string>(prefix.begin(), prefix.end()));
}

}  // namespace poirec
