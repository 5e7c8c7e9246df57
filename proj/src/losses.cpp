#include "advrank/losses.hpp"

#include <algorithm>
#include <cmath>

namespace advrank {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

LossValue pointwise_ce(double score, int y) {
  LossValue out;
  out.value = y == 1 ? softplus(-score) : softplus(score);
  out.d_score = sigmoid(score) - static_cast<double>(y);
  return out;
}

LossValue pairwise_loss(double score_pos, double score_neg) {
  const double diff = score_pos - score_neg;
  LossValue out;
  out.value = softplus(-diff);
  out.d_score = sigmoid(diff) - 1.0;
  return out;
}

double bernoulli_kl(double p, double p_prime) {
  const double a = clamp_prob(p);
  const double b = clamp_prob(p_prime);
  const double d = b - a;
  if (std::abs(d) < kZeroGradThreshold) {
    return 0.0;
  }
  // log1p form keeps tiny divergences accurate: the leading +/-d parts of the
  // two terms cancel analytically, leaving the quadratic remainder intact.
  const double kl = -a * std::log1p(d / a) - (1.0 - a) * std::log1p(-d / (1.0 - a));
  return std::max(kl, 0.0);
}

double bernoulli_kl_dp_prime(double p, double p_prime) {
  const double a = clamp_prob(p);
  const double b = clamp_prob(p_prime);
  if (b != p_prime) {
    return 0.0;  // clamp active: the KL value no longer responds to p_prime
  }
  if (std::abs(a - b) < kZeroGradThreshold) {
    return 0.0;
  }
  return (b - a) / (b * (1.0 - b));
}

}  // namespace advrank
