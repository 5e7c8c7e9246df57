#include "advrank/perturb.hpp"

#include "advrank/losses.hpp"

#include <stdexcept>

namespace advrank {

Vec scale_to_ball(const Eigen::Ref<const Vec>& g, const PerturbConfig& cfg) {
  if (cfg.norm == PerturbNorm::MaxNorm) {
    if (g.norm() <= kZeroGradThreshold) {
      return Vec::Zero(g.size());
    }
    return sign_scale(g, cfg.epsilon);
  }
  return l2_normalize(g, cfg.epsilon);
}

Perturbation adversarial_perturbation(const ScoreModel& model, const Example& e, int y,
                                      const PerturbConfig& cfg) {
  const double s = model.score(e);
  const double upstream = pointwise_ce(s, y).d_score;
  const InputGrads g = model.input_grads(e, upstream);
  Perturbation eta;
  if (g.q) {
    eta.eta_q = scale_to_ball(*g.q, cfg);
  }
  if (g.d) {
    eta.eta_d = scale_to_ball(*g.d, cfg);
  }
  return eta;
}

PairPerturbation pairwise_adversarial_perturbation(const ScoreModel& model, const Example& pos,
                                                   const Example& neg, const PerturbConfig& cfg) {
  const double f_pos = model.score(pos);
  const double f_neg = model.score(neg);
  const double upstream = pairwise_loss(f_pos, f_neg).d_score;
  const InputGrads g_pos = model.input_grads(pos, upstream);
  const InputGrads g_neg = model.input_grads(neg, -upstream);

  PairPerturbation eta;
  if (g_pos.q) {
    // The query appears in both scores of the pair.
    eta.eta_q = scale_to_ball(*g_pos.q + *g_neg.q, cfg);
  }
  if (g_pos.d) {
    eta.eta_dpos = scale_to_ball(*g_pos.d, cfg);
  }
  if (g_neg.d) {
    eta.eta_dneg = scale_to_ball(*g_neg.d, cfg);
  }
  return eta;
}

Perturbation vat_perturbation(const ScoreModel& model, const Example& e,
                              const PerturbConfig& cfg, Rng& rng) {
  const SlotDims dims = model.slot_dims(e);
  const double p_clean = sigmoid(model.score(e));

  // Seed offsets for every perturbable input, scaled to the probe radius.
  Perturbation probe;
  if (dims.q) {
    probe.eta_q = l2_normalize(rng.normal_vec(*dims.q), cfg.vat_xi * cfg.epsilon);
  }
  probe.eta_d = l2_normalize(rng.normal_vec(dims.d), cfg.vat_xi * cfg.epsilon);

  // Power passes: probe the KL at the joint offset, follow its input
  // gradient back to the epsilon ball per slot, and re-seed with the result.
  // The joint probe keeps the slot directions sign-consistent.
  Perturbation eta;
  for (int iter = 0; iter < cfg.vat_power_iters; ++iter) {
    const double f = model.score(e, &probe);
    const double p_probe = sigmoid(f);
    const double upstream = bernoulli_kl_dp_prime(p_clean, p_probe) * p_probe * (1.0 - p_probe);
    const InputGrads g = model.input_grads(e, upstream, &probe);
    if (g.q) {
      eta.eta_q = scale_to_ball(*g.q, cfg);
    }
    eta.eta_d = scale_to_ball(*g.d, cfg);
    probe = eta;
  }
  return eta;
}

Vec apply_continuous(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& eta) {
  if (x.size() != eta.size()) {
    throw std::invalid_argument("apply_continuous: length mismatch");
  }
  return x + eta;
}

Vec apply_discrete(const Eigen::Ref<const Vec>& x_one_hot, const Eigen::Ref<const Vec>& eta,
                   const Eigen::Ref<const Mat>& embeddings) {
  if (x_one_hot.size() != eta.size() || x_one_hot.size() != embeddings.rows()) {
    throw std::invalid_argument("apply_discrete: dimension mismatch");
  }
  return embeddings.transpose() * (x_one_hot + eta);
}

}  // namespace advrank
