#pragma once

#include "advrank/data.hpp"
#include "advrank/models.hpp"
#include "advrank/numerics.hpp"

namespace advrank {

enum class SamplerKind { Uniform, Adversarial };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Adversarial;
  /// Softmax temperature over candidate scores.
  double tau = 1.0;
  /// Candidate subset size C drawn before scoring; 0 means the whole pool.
  int candidate_pool = 64;
  /// Full-pool score caches are considered fresh for K batches. K == 1 skips
  /// caching and rescores each drawn candidate subset directly.
  int refresh_every_batches = 1;
  /// Keep clicked documents of a query out of its negative pool.
  bool exclude_labeled = true;
};

/// Per-query negative candidate pools with optional cached scores.
class NegativePool {
 public:
  NegativePool(const RankingDataset& ds, const SamplerConfig& cfg);

  /// Uniform draw from the query's pool, with replacement across calls.
  /// Returns a doc index into the query; throws on an empty pool.
  int sample_uniform(int query_idx, Rng& rng) const;

  /// Draw min(C, pool) candidates uniformly without replacement, then one of
  /// them from softmax(score / tau). Scores come from the cache when fresh,
  /// otherwise the candidates are scored against the current model.
  int sample_adversarial(int query_idx, const ScoreModel& model, const SamplerConfig& cfg,
                         Rng& rng);

  /// Dispatch on cfg.kind.
  int sample(int query_idx, const ScoreModel& model, const SamplerConfig& cfg, Rng& rng);

  /// Rescore the whole pool of one query and reset its staleness.
  void refresh_scores(int query_idx, const ScoreModel& model);

  /// Advance the batch clock used for staleness accounting.
  void tick_batch() { ++batch_; }

  /// Batches since the last refresh (a large number when never refreshed).
  int staleness(int query_idx) const;

  /// Negatives drawn so far (one per sample_* call).
  std::uint64_t samples_drawn() const { return samples_drawn_; }

  const std::vector<int>& pool(int query_idx) const { return pools_[query_idx].docs; }
  const Vec& cached_scores(int query_idx) const { return pools_[query_idx].scores; }

 private:
  struct Entry {
    std::vector<int> docs;
    Vec scores;              // aligned with docs; empty until first refresh
    long long refreshed_at = -1;
  };

  std::vector<int> draw_candidates(const Entry& entry, int count, Rng& rng) const;

  const RankingDataset* ds_;
  std::vector<Entry> pools_;
  long long batch_ = 0;
  mutable std::uint64_t samples_drawn_ = 0;
};

}  // namespace advrank
