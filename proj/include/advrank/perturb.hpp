#pragma once

#include "advrank/models.hpp"
#include "advrank/numerics.hpp"

namespace advrank {

enum class PerturbNorm { L2, MaxNorm };

struct PerturbConfig {
  /// Ball radius; the same epsilon bounds every perturbed input of an
  /// example. epsilon == 0 disables perturbation generation entirely.
  double epsilon = 1.0;
  PerturbNorm norm = PerturbNorm::L2;
  /// The virtual-adversarial probe offset has norm vat_xi * epsilon.
  double vat_xi = 0.01;
  int vat_power_iters = 1;
};

/// Perturbations of a (query, doc+, doc-) triple; eta_q is absent for
/// joint-input models, where the pair is two separate joint vectors.
struct PairPerturbation {
  std::optional<Vec> eta_q;
  std::optional<Vec> eta_dpos;
  std::optional<Vec> eta_dneg;
};

/// Scale a loss gradient to the epsilon ball surface under the configured
/// norm; a gradient below the zero threshold yields a zero vector.
Vec scale_to_ball(const Eigen::Ref<const Vec>& g, const PerturbConfig& cfg);

/// First-order worst-case offset for the pointwise cross-entropy loss of a
/// labeled example, one vector per perturbable input. Reads the model
/// parameters only (snapshot semantics: nothing propagates back).
Perturbation adversarial_perturbation(const ScoreModel& model, const Example& e, int y,
                                      const PerturbConfig& cfg);

/// Same construction against the pairwise preference loss; all three inputs
/// get independent perturbations bounded by the same epsilon.
PairPerturbation pairwise_adversarial_perturbation(const ScoreModel& model, const Example& pos,
                                                   const Example& neg, const PerturbConfig& cfg);

/// Label-free perturbation: one power-method pass (or more) on the Bernoulli
/// KL between the clean and offset relevance distributions, seeded with a
/// random offset of norm vat_xi * epsilon per input.
Perturbation vat_perturbation(const ScoreModel& model, const Example& e,
                              const PerturbConfig& cfg, Rng& rng);

/// x + eta.
Vec apply_continuous(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& eta);

/// Perturbed embedding of a one-hot input: (x + eta)^T Z.
Vec apply_discrete(const Eigen::Ref<const Vec>& x_one_hot, const Eigen::Ref<const Vec>& eta,
                   const Eigen::Ref<const Mat>& embeddings);

}  // namespace advrank
