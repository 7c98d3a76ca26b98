#include "pedcascade/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pedcascade {

void BatchRatio::validate() const {
  if (pos < 1 || neg < 1) throw std::invalid_argument("batch ratio terms must be >= 1");
}

BatchCounts ratio_counts(const BatchRatio& ratio, int batch) {
  ratio.validate();
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
  const int pos = static_cast<int>(
      std::lround(static_cast<double>(batch) * ratio.pos / static_cast<double>(ratio.pos + ratio.neg)));
  return {pos, batch - pos};
}

namespace {

void draw_from(const std::vector<std::size_t>& pool, int count, std::mt19937_64& rng, std::vector<std::size_t>& out) {
  if (count <= 0) return;
  if (pool.size() >= static_cast<std::size_t>(count)) {
    std::vector<std::size_t> copy = pool;
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), copy.size() - 1);
      std::swap(copy[static_cast<std::size_t>(i)], copy[pick(rng)]);
      out.push_back(copy[static_cast<std::size_t>(i)]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int i = 0; i < count; ++i) out.push_back(pool[pick(rng)]);
  }
}

}  // namespace

std::vector<std::size_t> sample_batch(std::span<const int> labels, const std::optional<BatchRatio>& ratio, int batch,
                                      std::mt19937_64& rng) {
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
  if (labels.empty()) throw std::invalid_argument("sample_batch: empty pool");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(batch));
  if (!ratio) {
    std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
    for (int i = 0; i < batch; ++i) out.push_back(pick(rng));
    return out;
  }
  const BatchCounts counts = ratio_counts(*ratio, batch);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  if ((counts.pos > 0 && pos.empty()) || (counts.neg > 0 && neg.empty())) {
    throw std::invalid_argument("sample_batch: a class required by the batch ratio is missing from the pool");
  }
  draw_from(pos, counts.pos, rng, out);
  draw_from(neg, counts.neg, rng, out);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

BatchSampler::BatchSampler(std::vector<int> labels, std::optional<BatchRatio> ratio, int batch, std::uint64_t seed)
    : labels_(std::move(labels)), ratio_(ratio), batch_(batch), rng_(seed) {
  if (batch_ < 1) throw std::invalid_argument("batch size must be >= 1");
  if (labels_.empty()) throw std::invalid_argument("BatchSampler: empty pool");
  if (ratio_) {
    ratio_->validate();
    const BatchCounts c = ratio_counts(*ratio_, batch_);
    const bool has_pos = std::any_of(labels_.begin(), labels_.end(), [](int l) { return l > 0; });
    const bool has_neg = std::any_of(labels_.begin(), labels_.end(), [](int l) { return l <= 0; });
    if ((c.pos > 0 && !has_pos) || (c.neg > 0 && !has_neg)) {
      throw std::invalid_argument("BatchSampler: a class required by the batch ratio is missing from the pool");
    }
  }
}

std::size_t BatchSampler::batches_per_epoch() const noexcept {
  return (labels_.size() + static_cast<std::size_t>(batch_) - 1) / static_cast<std::size_t>(batch_);
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> batch = sample_batch(labels_, ratio_, batch_, rng_);
  BatchCounts c;
  for (std::size_t i : batch) (labels_[i] > 0 ? c.pos : c.neg)++;
  history_.push_back(c);
  if (ratio_ && !(c == ratio_counts(*ratio_, batch_))) ++violations_;
  return batch;
}

}  // namespace pedcascade
