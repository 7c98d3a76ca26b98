#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace pedcascade {

/// Positives:negatives ratio enforced in every training batch.
struct BatchRatio {
  int pos = 1;
  int neg = 5;

  void validate() const;
};

struct BatchCounts {
  int pos = 0;
  int neg = 0;
  friend bool operator==(const BatchCounts&, const BatchCounts&) = default;
};

/// Class counts forced by a ratio: round(batch * pos / (pos + neg)) positives,
/// the remainder negatives.
BatchCounts ratio_counts(const BatchRatio& ratio, int batch);

/// Draws one batch of pool indices (labels: 1 positive, 0 negative).
///
/// With a ratio, each class contributes exactly its forced count, drawn
/// without replacement when the class pool is large enough and uniformly with
/// replacement otherwise; the batch order is then shuffled. Without a ratio
/// the batch is a uniform draw with replacement from the whole pool. Throws
/// std::invalid_argument when a class required by the ratio is absent.
std::vector<std::size_t> sample_batch(std::span<const int> labels, const std::optional<BatchRatio>& ratio, int batch,
                                      std::mt19937_64& rng);

/// Seeded batch source for a fixed pool, with per-batch composition records.
class BatchSampler {
 public:
  BatchSampler(std::vector<int> labels, std::optional<BatchRatio> ratio, int batch, std::uint64_t seed);

  std::vector<std::size_t> next();

  int label(std::size_t index) const { return labels_.at(index); }
  std::size_t pool_size() const noexcept { return labels_.size(); }
  int batch_size() const noexcept { return batch_; }
  const std::optional<BatchRatio>& ratio() const noexcept { return ratio_; }
  /// ceil(pool_size / batch_size)
  std::size_t batches_per_epoch() const noexcept;

  /// Composition of every batch handed out so far.
  const std::vector<BatchCounts>& history() const noexcept { return history_; }
  /// Batches whose composition differs from the enforced ratio (always 0 unless broken).
  std::size_t ratio_violations() const noexcept { return violations_; }

 private:
  std::vector<int> labels_;
  std::optional<BatchRatio> ratio_;
  int batch_;
  std::mt19937_64 rng_;
  std::vector<BatchCounts> history_;
  std::size_t violations_ = 0;
};

}  // namespace pedcascade
