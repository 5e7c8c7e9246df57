#pragma once

#include "advrank/numerics.hpp"

namespace advrank {

/// Loss value plus its derivative with respect to the model score
/// (pointwise) or the score difference f(q,d+) - f(q,d-) (pairwise).
struct LossValue {
  double value = 0.0;
  double d_score = 0.0;
};

/// Probabilities entering a KL term are clamped to [kProbClamp, 1-kProbClamp]
/// so the logs stay finite.
inline constexpr double kProbClamp = 1e-12;

double clamp_prob(double p);

/// Binary cross entropy of a relevance score: -log p(y|score) with
/// p(y=1) = sigmoid(score). Computed in softplus form, stable for |score|
/// up to ~1e3.
LossValue pointwise_ce(double score, int y);

/// -log sigmoid(score_pos - score_neg).
LossValue pairwise_loss(double score_pos, double score_neg);

/// KL divergence between Bernoulli(p) and Bernoulli(p_prime), clamped.
/// Distributions closer than kZeroGradThreshold are treated as identical
/// (result exactly 0).
double bernoulli_kl(double p, double p_prime);

/// d bernoulli_kl / d p_prime at clamped arguments; 0 when the clamp is
/// active on p_prime or the inputs are within kZeroGradThreshold.
double bernoulli_kl_dp_prime(double p, double p_prime);

}  // namespace advrank
