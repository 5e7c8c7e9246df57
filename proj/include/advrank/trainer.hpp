#pragma once

#include "advrank/eval.hpp"
#include "advrank/perturb.hpp"
#include "advrank/sampling.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace advrank {

enum class Objective {
  PlainPointwise,  // cross entropy on the positive and one sampled negative
  PlainPairwise,   // preference loss on (positive, sampled negative)
  PointwiseAT,     // plain pointwise plus the loss at adversarial inputs
  PairwiseAT,      // plain pairwise plus the loss at the perturbed triple
  FullVAT,         // cross entropy on labeled data, KL smoothing on everything
  PointwiseSVAT,   // plain pointwise plus KL smoothing on both examples
  PairwiseSVAT,    // plain pairwise plus KL smoothing on both documents
};

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& name);
bool objective_is_pairwise(Objective o);

struct TrainConfig {
  Objective objective = Objective::PairwiseAT;
  int epochs = 100;
  double learning_rate = 0.05;
  /// Positives accumulated per SGD update.
  int batch_size = 1;
  PerturbConfig perturb;
  SamplerConfig sampler;
  /// Weight of the adversarial / KL term in the objective.
  double alpha = 1.0;
  /// L2 decay applied to the parameters each update touches; off by default.
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  /// Evaluate on the held-out set every this many epochs (0 = never).
  int eval_every = 25;
  std::vector<int> eval_cutoffs = {1, 3, 5, 10};
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
  /// Negatives drawn from the pool this epoch; equals the positive count for
  /// every sampling objective.
  std::uint64_t negatives_sampled = 0;
  std::optional<EvalReport> eval;
};

/// Raised when a step produces a non-finite loss; names the offending example.
class TrainAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shared mutable state threaded through the per-example steps.
struct TrainState {
  ScoreModel& model;
  const RankingDataset& ds;
  NegativePool& pool;
  const TrainConfig& cfg;
  ParamGrad& grad;
  Rng& rng;
};

// Each step consumes one positive (sampling its negative where the objective
// needs one), accumulates all parameter gradients of its terms into
// state.grad, and returns the loss contribution. The train loop applies one
// SGD update per batch (one positive per update at the default batch size).
double step_plain_pointwise(TrainState& s, int query_idx, int pos_doc);
double step_plain_pairwise(TrainState& s, int query_idx, int pos_doc);
double step_pointwise_at(TrainState& s, int query_idx, int pos_doc);
double step_pairwise_at(TrainState& s, int query_idx, int pos_doc);
double step_pointwise_svat(TrainState& s, int query_idx, int pos_doc);
double step_pairwise_svat(TrainState& s, int query_idx, int pos_doc);
/// One labeled or unlabeled example of the full virtual-adversarial pass.
double step_full_vat(TrainState& s, int query_idx, int doc, bool labeled);

/// Run the configured objective. Shuffles positives each epoch with the
/// seeded generator (FullVAT interleaves a full pass over unlabeled
/// examples), optionally evaluates every eval_every epochs against eval_ds,
/// and writes one tab-separated line per epoch to log when given.
/// Deterministic given the seed. Throws TrainAbort on a non-finite loss.
std::vector<EpochLog> train(ScoreModel& model, const RankingDataset& ds, const TrainConfig& cfg,
                            const RankingDataset* eval_ds = nullptr, std::ostream* log = nullptr);

}  // namespace advrank
