#include "adaptmt/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "adaptmt/error.hpp"
#include "adaptmt/hash.hpp"
#include "adaptmt/text.hpp"

namespace adaptmt {

std::vector<EmbeddingVector> Embedder::embed_many(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashedTrigramEmbedder::HashedTrigramEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw Error("retrieval", "embedding dimension must be positive");
}

std::vector<std::string> HashedTrigramEmbedder::trigrams(std::string_view input) {
  const auto norm = text::to_lower(text::normalize_whitespace(input));
  if (norm.empty()) throw Error("retrieval", "cannot embed empty text");
  std::u32string marked = U"#";
  marked += text::decode_utf8(norm);
  marked += U'#';
  std::vector<std::string> out;
  if (marked.size() < 3) return out;
  out.reserve(marked.size() - 2);
  for (std::size_t i = 0; i + 3 <= marked.size(); ++i) {
    out.push_back(text::encode_utf8(std::u32string_view(marked).substr(i, 3)));
  }
  return out;
}

std::size_t HashedTrigramEmbedder::bucket(std::string_view trigram) const {
  return static_cast<std::size_t>(stable_hash64(trigram, seed_) % dimension_);
}

EmbeddingVector HashedTrigramEmbedder::embed(std::string_view input) const {
  EmbeddingVector v(dimension_, 0.0);
  for (const auto& tri : trigrams(input)) v[bucket(tri)] += 1.0;
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) return v;
  const double norm = std::sqrt(norm2);
  for (double& x : v) x /= norm;
  return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw Error("retrieval", "dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void RetrievalConfig::validate() const {
  if (top_k < 1) throw Error("retrieval", "top_k must be >= 1");
  if (top_k > 10) {
    if (!allow_large_top_k) throw Error("retrieval", "top_k must be <= 10 unless explicitly allowed");
    spdlog::warn("retrieval: top_k={} exceeds the usual range 1..10", top_k);
  }
  if (min_similarity && (*min_similarity < 0.0 || *min_similarity > 1.0)) {
    throw Error("retrieval", "min_similarity must be in [0,1]");
  }
}

Index::Index(std::vector<SegmentPair> pairs, std::shared_ptr<const Embedder> embedder,
             std::uint64_t tm_version)
    : pairs_(std::move(pairs)),
      embedder_(embedder ? std::move(embedder) : std::make_shared<HashedTrigramEmbedder>()),
      dim_(embedder_->dimension()),
      tm_version_(tm_version) {
  if (pairs_.empty()) throw Error("retrieval", "cannot index an empty TM");
  std::vector<std::string> sources;
  sources.reserve(pairs_.size());
  for (const auto& p : pairs_) sources.push_back(p.source);
  load(embedder_->embed_many(sources));
}

Index::Index(std::vector<SegmentPair> pairs, const std::vector<EmbeddingVector>& vectors,
             std::shared_ptr<const Embedder> embedder, std::uint64_t tm_version)
    : pairs_(std::move(pairs)),
      embedder_(embedder ? std::move(embedder) : std::make_shared<HashedTrigramEmbedder>()),
      dim_(embedder_->dimension()),
      tm_version_(tm_version) {
  if (pairs_.empty()) throw Error("retrieval", "cannot index an empty TM");
  load(vectors);
}

void Index::load(const std::vector<EmbeddingVector>& vectors) {
  const std::size_t n = pairs_.size();
  if (vectors.size() != n) throw Error("retrieval", "embedder returned a wrong number of vectors");
  normalized_sources_.reserve(n);
  for (const auto& p : pairs_) normalized_sources_.push_back(text::normalize_whitespace(p.source));
  matrix_.assign(dim_ * n, 0.0);
  for (std::size_t row = 0; row < n; ++row) {
    if (vectors[row].size() != dim_) throw Error("retrieval", "embedder returned a wrong dimension");
    for (std::size_t j = 0; j < dim_; ++j) matrix_[j * n + row] = vectors[row][j];
  }
}

EmbeddingVector Index::vector(std::size_t i) const {
  EmbeddingVector v(dim_);
  for (std::size_t j = 0; j < dim_; ++j) v[j] = matrix_[j * pairs_.size() + i];
  return v;
}

std::vector<double> Index::scores(const EmbeddingVector& query) const {
  if (query.size() != dim_) throw Error("retrieval", "query dimension mismatch");
  const std::size_t n = pairs_.size();
  std::vector<double> out(n, 0.0);
  // Accumulates bucket by bucket in ascending order, so each row's sum is
  // bit-identical to a plain dense dot product over the same vectors.
  for (std::size_t j = 0; j < dim_; ++j) {
    const double q = query[j];
    if (q == 0.0) continue;
    const double* col = matrix_.data() + j * n;
    for (std::size_t r = 0; r < n; ++r) out[r] += q * col[r];
  }
  return out;
}

std::vector<FuzzyMatch> Index::retrieve(std::string_view query, const RetrievalConfig& cfg,
                                        std::optional<SegmentId> self_id) const {
  cfg.validate();
  if (text::trim(query).empty()) throw Error("retrieval", "query must be non-empty");
  const auto raw = scores(embedder_->embed(query));
  const auto norm_query = text::normalize_whitespace(query);

  std::vector<std::size_t> rows;
  rows.reserve(raw.size());
  for (std::size_t r = 0; r < raw.size(); ++r) {
    if (cfg.exclude_exact_self && self_id && pairs_[r].id == *self_id &&
        normalized_sources_[r] == norm_query) {
      continue;
    }
    if (cfg.min_similarity && raw[r] < *cfg.min_similarity) continue;
    rows.push_back(r);
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), rows.size());
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (raw[a] != raw[b]) return raw[a] > raw[b];
                      return a < b;
                    });
  std::vector<FuzzyMatch> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({pairs_[rows[i]], std::clamp(raw[rows[i]], 0.0, 1.0)});
  }
  return out;
}

std::shared_ptr<const Index> build_index(const TranslationMemory& tm,
                                         std::shared_ptr<const Embedder> embedder) {
  const auto version = tm.version();
  auto pairs = tm.pairs();
  if (pairs.empty()) throw Error("retrieval", "cannot index an empty TM");
  return std::make_shared<const Index>(std::move(pairs), std::move(embedder), version);
}

std::shared_ptr<const Index> extend_index(const Index& base, std::vector<SegmentPair> added,
                                          std::uint64_t tm_version) {
  auto pairs = base.pairs();
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(pairs.size() + added.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) vectors.push_back(base.vector(i));
  for (auto& p : added) {
    vectors.push_back(base.embedder().embed(p.source));
    pairs.push_back(std::move(p));
  }
  return std::make_shared<const Index>(std::move(pairs), vectors, base.embedder_ptr(), tm_version);
}

std::shared_ptr<const Index> IndexHandle::get() const {
  std::lock_guard lock(mutex_);
  return index_;
}

void IndexHandle::set(std::shared_ptr<const Index> index) {
  std::lock_guard lock(mutex_);
  index_ = std::move(index);
}

const std::array<std::string_view, BucketHistogram::kBuckets>& BucketHistogram::labels() {
  static const std::array<std::string_view, kBuckets> names = {
      "[0.9,1.0]", "[0.8,0.9)", "[0.7,0.8)", "[0.6,0.7)", "[0.5,0.6)", "[0,0.5)"};
  return names;
}

std::size_t BucketHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t bucket_of(double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw Error("retrieval", "score outside [0,1]");
  if (score >= 0.9) return 0;
  if (score >= 0.8) return 1;
  if (score >= 0.7) return 2;
  if (score >= 0.6) return 3;
  if (score >= 0.5) return 4;
  return 5;
}

BucketHistogram bucket_stats(std::span<const double> scores) {
  BucketHistogram h;
  for (double s : scores) ++h.counts[bucket_of(s)];
  return h;
}

BucketHistogram bucket_stats(std::span<const FuzzyMatch> matches) {
  BucketHistogram h;
  for (const auto& m : matches) ++h.counts[bucket_of(m.score)];
  return h;
}

}  // namespace adaptmt
