#include "advrank/sampling.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace advrank {

NegativePool::NegativePool(const RankingDataset& ds, const SamplerConfig& cfg) : ds_(&ds) {
  pools_.resize(ds.queries.size());
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& q = ds.queries[qi];
    auto& docs = pools_[qi].docs;
    docs = q.unlabeled;
    if (!cfg.exclude_labeled) {
      docs.insert(docs.end(), q.labeled.begin(), q.labeled.end());
      std::sort(docs.begin(), docs.end());
    }
  }
}

int NegativePool::sample_uniform(int query_idx, Rng& rng) const {
  const auto& docs = pools_[query_idx].docs;
  if (docs.empty()) {
    throw std::runtime_error("sample_uniform: empty negative pool for query " +
                             ds_->queries[query_idx].id);
  }
  ++samples_drawn_;
  return docs[rng.uniform_index(docs.size())];
}

std::vector<int> NegativePool::draw_candidates(const Entry& entry, int count, Rng& rng) const {
  const int n = static_cast<int>(entry.docs.size());
  std::vector<int> positions;
  positions.reserve(count);
  if (count >= n) {
    for (int i = 0; i < n; ++i) {
      positions.push_back(i);
    }
    return positions;
  }
  std::unordered_set<int> taken;
  taken.reserve(count * 2);
  while (static_cast<int>(positions.size()) < count) {
    const int p = static_cast<int>(rng.uniform_index(n));
    if (taken.insert(p).second) {
      positions.push_back(p);
    }
  }
  return positions;
}

int NegativePool::sample_adversarial(int query_idx, const ScoreModel& model,
                                     const SamplerConfig& cfg, Rng& rng) {
  Entry& entry = pools_[query_idx];
  if (entry.docs.empty()) {
    throw std::runtime_error("sample_adversarial: empty negative pool for query " +
                             ds_->queries[query_idx].id);
  }
  const int pool_size = static_cast<int>(entry.docs.size());
  const int count = cfg.candidate_pool <= 0 ? pool_size : std::min(cfg.candidate_pool, pool_size);
  const std::vector<int> positions = draw_candidates(entry, count, rng);

  const bool use_cache = cfg.refresh_every_batches > 1;
  Vec scores(count);
  if (use_cache) {
    if (entry.refreshed_at < 0 || batch_ - entry.refreshed_at >= cfg.refresh_every_batches) {
      refresh_scores(query_idx, model);
    }
    for (int c = 0; c < count; ++c) {
      scores[c] = entry.scores[positions[c]];
    }
  } else {
    for (int c = 0; c < count; ++c) {
      scores[c] = model.score(ds_->example(query_idx, entry.docs[positions[c]]));
    }
  }

  const Vec probs = softmax_with_temperature(scores, cfg.tau);
  const double u = rng.uniform();
  double cum = 0.0;
  int chosen = count - 1;
  for (int c = 0; c < count; ++c) {
    cum += probs[c];
    if (u < cum) {
      chosen = c;
      break;
    }
  }
  ++samples_drawn_;
  return entry.docs[positions[chosen]];
}

int NegativePool::sample(int query_idx, const ScoreModel& model, const SamplerConfig& cfg,
                         Rng& rng) {
  if (cfg.kind == SamplerKind::Uniform) {
    return sample_uniform(query_idx, rng);
  }
  return sample_adversarial(query_idx, model, cfg, rng);
}

void NegativePool::refresh_scores(int query_idx, const ScoreModel& model) {
  Entry& entry = pools_[query_idx];
  if (entry.docs.empty()) {
    return;
  }
  entry.scores.resize(static_cast<Index>(entry.docs.size()));
  for (std::size_t i = 0; i < entry.docs.size(); ++i) {
    entry.scores[static_cast<Index>(i)] = model.score(ds_->example(query_idx, entry.docs[i]));
  }
  entry.refreshed_at = batch_;
}

int NegativePool::staleness(int query_idx) const {
  const Entry& entry = pools_[query_idx];
  if (entry.refreshed_at < 0) {
    return std::numeric_limits<int>::max();
  }
  return static_cast<int>(batch_ - entry.refreshed_at);
}

}  // namespace advrank
