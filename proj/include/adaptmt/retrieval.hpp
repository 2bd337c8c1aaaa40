#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptmt/tm.hpp"

namespace adaptmt {

using EmbeddingVector = std::vector<double>;

/// Text embedder. Implementations must be deterministic and return
/// unit-normalized vectors of dimension().
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  /// Defaults to calling embed() per text.
  virtual std::vector<EmbeddingVector> embed_many(std::span<const std::string> texts) const;
};

/// Character-trigram term frequencies hashed into `dimension` buckets.
///
/// The text is whitespace-normalized and lowercased, wrapped in '#' boundary
/// markers, and every run of three code points is hashed with
/// stable_hash64(trigram_utf8, seed) % dimension. The bucket counts are then
/// L2-normalized.
class HashedTrigramEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 1024;
  static constexpr std::uint64_t kDefaultSeed = 0x5eed7e3a11ceULL;

  explicit HashedTrigramEmbedder(std::size_t dimension = kDefaultDimension,
                                 std::uint64_t seed = kDefaultSeed);

  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

  /// The boundary-marked trigrams of `text`, in order, as UTF-8.
  static std::vector<std::string> trigrams(std::string_view text);
  std::size_t bucket(std::string_view trigram) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct RetrievalConfig {
  int top_k = 5;
  bool exclude_exact_self = false;
  std::optional<double> min_similarity;
  /// Permits top_k above 10 (logged as a warning).
  bool allow_large_top_k = false;

  void validate() const;
};

struct FuzzyMatch {
  SegmentPair pair;
  double score = 0.0;
};

/// Immutable embedding index over a snapshot of a TM. Scores are computed by
/// an exhaustive scan; the embedding matrix is stored bucket-major so each
/// non-zero query component is one contiguous multiply-add sweep over all rows.
class Index {
 public:
  Index(std::vector<SegmentPair> pairs, std::shared_ptr<const Embedder> embedder,
        std::uint64_t tm_version = 0);
  /// From precomputed row vectors (one per pair).
  Index(std::vector<SegmentPair> pairs, const std::vector<EmbeddingVector>& vectors,
        std::shared_ptr<const Embedder> embedder, std::uint64_t tm_version);

  std::size_t size() const noexcept { return pairs_.size(); }
  std::size_t dimension() const noexcept { return dim_; }
  std::uint64_t tm_version() const noexcept { return tm_version_; }
  const std::vector<SegmentPair>& pairs() const noexcept { return pairs_; }
  const Embedder& embedder() const noexcept { return *embedder_; }
  std::shared_ptr<const Embedder> embedder_ptr() const noexcept { return embedder_; }

  /// Row `i` of the embedding matrix.
  EmbeddingVector vector(std::size_t i) const;

  /// Raw cosine scores of `query` against every row, in row order.
  std::vector<double> scores(const EmbeddingVector& query) const;

  /// Top-k matches: scores non-increasing, ties by insertion order. With
  /// cfg.exclude_exact_self and a `self_id`, the row with that id is skipped
  /// when its normalized source equals the normalized query.
  std::vector<FuzzyMatch> retrieve(std::string_view query, const RetrievalConfig& cfg,
                                   std::optional<SegmentId> self_id = std::nullopt) const;

 private:
  void load(const std::vector<EmbeddingVector>& vectors);

  std::vector<SegmentPair> pairs_;
  std::vector<std::string> normalized_sources_;
  std::shared_ptr<const Embedder> embedder_;
  std::size_t dim_;
  std::uint64_t tm_version_;
  std::vector<double> matrix_;  // dim_ x size(), bucket-major
};

/// Throws Error("retrieval") on an empty TM.
std::shared_ptr<const Index> build_index(const TranslationMemory& tm,
                                         std::shared_ptr<const Embedder> embedder = nullptr);

/// New index holding `base` followed by `added`; only the added pairs are embedded.
std::shared_ptr<const Index> extend_index(const Index& base, std::vector<SegmentPair> added,
                                          std::uint64_t tm_version);

/// Holder that swaps whole index snapshots; readers see the old or the new
/// index, never a partial one.
class IndexHandle {
 public:
  std::shared_ptr<const Index> get() const;
  void set(std::shared_ptr<const Index> index);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const Index> index_;
};

/// Similarity histogram over [0.9,1.0], [0.8,0.9), [0.7,0.8), [0.6,0.7),
/// [0.5,0.6), [0,0.5).
struct BucketHistogram {
  static constexpr std::size_t kBuckets = 6;
  static const std::array<std::string_view, kBuckets>& labels();
  std::array<std::size_t, kBuckets> counts{};

  std::size_t total() const;
};

std::size_t bucket_of(double score);
BucketHistogram bucket_stats(std::span<const FuzzyMatch> matches);
BucketHistogram bucket_stats(std::span<const double> scores);

}  // namespace adaptmt
