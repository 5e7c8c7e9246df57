#pragma once

#include "advrank/numerics.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace advrank {

enum class Representation { JointFeatures, UserItemIds, TokenSequences };

/// One (query, document) instance in whatever representation the scoring
/// model consumes. Non-owning views; exactly the fields matching the model's
/// representation must be populated.
struct Example {
  const double* features_data = nullptr;  // JointFeatures
  Index features_size = 0;
  int user = -1;  // UserItemIds
  int item = -1;
  const std::vector<int>* query_tokens = nullptr;  // TokenSequences
  const std::vector<int>* doc_tokens = nullptr;

  Eigen::Map<const Vec> features() const { return {features_data, features_size}; }

  static Example joint(const Eigen::Ref<const Vec>& x) {
    Example e;
    e.features_data = x.data();
    e.features_size = x.size();
    return e;
  }
  static Example user_item(int user, int item) {
    Example e;
    e.user = user;
    e.item = item;
    return e;
  }
  static Example tokens(const std::vector<int>& q, const std::vector<int>& d) {
    Example e;
    e.query_tokens = &q;
    e.doc_tokens = &d;
    return e;
  }
};

/// An epsilon-bounded additive offset for the perturbable inputs of one
/// example. Two-input models fill eta_q (query side) and eta_d (document
/// side); joint-input models carry their single input offset in eta_d.
/// For token-sequence models the vectors live in vocabulary space.
struct Perturbation {
  std::optional<Vec> eta_q;
  std::optional<Vec> eta_d;

  bool empty() const { return !eta_q && !eta_d; }
};

/// Gradients of a scalar objective with respect to the same slots a
/// Perturbation addresses.
struct InputGrads {
  std::optional<Vec> q;
  std::optional<Vec> d;
};

/// Sizes of the perturbable slots for one example; q is absent for
/// joint-input models.
struct SlotDims {
  std::optional<Index> q;
  Index d = 0;
};

/// Sparse gradient accumulator over a model's flat parameter vector.
/// apply_sgd touches only the entries written since the last apply, so
/// per-example updates on large embedding tables stay cheap.
class ParamGrad {
 public:
  void reset(Index n);
  void add(Index i, double v);
  void add_segment(Index base, const Eigen::Ref<const Vec>& g, double scale = 1.0);
  /// params -= lr * grad (+ lr * weight_decay * params on touched entries),
  /// then clears the accumulator.
  void apply_sgd(Vec& params, double lr, double weight_decay = 0.0);
  /// Dense copy of the accumulated gradient (test support).
  Vec to_dense() const;
  Index size() const { return dense_.size(); }

 private:
  Vec dense_;
  std::vector<Index> touched_;
  std::vector<char> is_touched_;
};

/// A differentiable relevance scorer f_theta. Scoring and gradient queries
/// are const (safe to fan out); only set_params_flat / sgd updates mutate.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual Representation representation() const = 0;
  virtual std::string kind() const = 0;

  /// f_theta at the (optionally perturbed) inputs.
  virtual double score(const Example& e, const Perturbation* eta = nullptr) const = 0;

  /// upstream * d f/d input for every perturbable slot, evaluated at the
  /// perturbed point.
  virtual InputGrads input_grads(const Example& e, double upstream,
                                 const Perturbation* eta = nullptr) const = 0;

  virtual SlotDims slot_dims(const Example& e) const = 0;

  /// acc += upstream * d f/d theta, evaluated at the perturbed point.
  virtual void accumulate_param_grad(const Example& e, double upstream,
                                     const Perturbation* eta, ParamGrad& acc) const = 0;

  virtual Index param_count() const = 0;
  virtual Vec params_flat() const = 0;
  virtual void set_params_flat(const Eigen::Ref<const Vec>& theta) = 0;

  /// Uniform [-0.05, 0.05] for weight matrices, zeros for biases.
  virtual void init_params(Rng& rng) = 0;

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

 protected:
  // Concrete models keep all parameters in one flat vector and expose
  // segment views; apply_sgd mutates it in place.
  Vec params_;
};

/// Two-layer ReLU scorer over a joint query-document feature vector:
/// f(x) = w2 . relu(W1 x + b1) + b2. The ReLU subgradient at exactly 0 is 0.
class RankMlp final : public ScoreModel {
 public:
  RankMlp(Index input_dim, Index hidden_dim);

  Representation representation() const override { return Representation::JointFeatures; }
  std::string kind() const override { return "rank_mlp"; }

  double score(const Example& e, const Perturbation* eta = nullptr) const override;
  InputGrads input_grads(const Example& e, double upstream,
                         const Perturbation* eta = nullptr) const override;
  SlotDims slot_dims(const Example& e) const override;
  void accumulate_param_grad(const Example& e, double upstream, const Perturbation* eta,
                             ParamGrad& acc) const override;
  Index param_count() const override { return params_.size(); }
  Vec params_flat() const override { return params_; }
  void set_params_flat(const Eigen::Ref<const Vec>& theta) override;
  void init_params(Rng& rng) override;

  Index input_dim() const { return input_dim_; }
  Index hidden_dim() const { return hidden_dim_; }

  // Flat layout: [W1 row-major (l*k) | b1 (l) | w2 (l) | b2].
  Eigen::Map<const Mat> w1() const;
  Eigen::Map<const Vec> b1() const;
  Eigen::Map<const Vec> w2() const;
  double b2() const { return params_[params_.size() - 1]; }

  double score_features(const Eigen::Ref<const Vec>& x) const;
  Vec input_grad_features(const Eigen::Ref<const Vec>& x, double upstream) const;

 private:
  Vec perturbed_input(const Example& e, const Perturbation* eta) const;
  Index input_dim_;
  Index hidden_dim_;
};

/// Matrix factorization with an item bias: f(u,i) = v_u . v_i + b_i.
/// The perturbable inputs are the two latent vectors.
class MatFac final : public ScoreModel {
 public:
  MatFac(Index num_users, Index num_items, Index latent_dim);

  Representation representation() const override { return Representation::UserItemIds; }
  std::string kind() const override { return "mat_fac"; }

  double score(const Example& e, const Perturbation* eta = nullptr) const override;
  InputGrads input_grads(const Example& e, double upstream,
                         const Perturbation* eta = nullptr) const override;
  SlotDims slot_dims(const Example& e) const override;
  void accumulate_param_grad(const Example& e, double upstream, const Perturbation* eta,
                             ParamGrad& acc) const override;
  Index param_count() const override { return params_.size(); }
  Vec params_flat() const override { return params_; }
  void set_params_flat(const Eigen::Ref<const Vec>& theta) override;
  void init_params(Rng& rng) override;

  Index num_users() const { return num_users_; }
  Index num_items() const { return num_items_; }
  Index latent_dim() const { return latent_dim_; }

  // Flat layout: [user vectors (U*k) | item vectors (I*k) | item biases (I)].
  Eigen::Map<const Vec> user_vec(Index u) const;
  Eigen::Map<const Vec> item_vec(Index i) const;
  double item_bias(Index i) const;

  double score_ids(Index u, Index i) const;
  /// (d f/d v_u, d f/d v_i) = (v_i, v_u); callers scale by the upstream
  /// loss derivative.
  std::pair<Vec, Vec> input_grad_vectors(Index u, Index i) const;

 private:
  void check_ids(const Example& e) const;
  Index num_users_;
  Index num_items_;
  Index latent_dim_;
};

/// Cosine similarity of mean-pooled token embeddings. Perturbations live in
/// vocabulary space and mix embedding rows: pooled(tokens, eta) =
/// mean_t z[tok_t] + Z^T eta, one shared eta per side.
class EmbedCosine final : public ScoreModel {
 public:
  EmbedCosine(Index vocab_size, Index embed_dim);

  Representation representation() const override { return Representation::TokenSequences; }
  std::string kind() const override { return "embed_cosine"; }

  double score(const Example& e, const Perturbation* eta = nullptr) const override;
  InputGrads input_grads(const Example& e, double upstream,
                         const Perturbation* eta = nullptr) const override;
  SlotDims slot_dims(const Example& e) const override;
  void accumulate_param_grad(const Example& e, double upstream, const Perturbation* eta,
                             ParamGrad& acc) const override;
  Index param_count() const override { return params_.size(); }
  Vec params_flat() const override { return params_; }
  void set_params_flat(const Eigen::Ref<const Vec>& theta) override;
  void init_params(Rng& rng) override;

  Index vocab_size() const { return vocab_size_; }
  Index embed_dim() const { return embed_dim_; }

  Eigen::Map<const Mat> embeddings() const;

  /// Mean-pooled embedding of a token sequence plus the optional
  /// vocabulary-space offset. Throws on an empty sequence.
  Vec pooled(const std::vector<int>& tokens, const Vec* eta = nullptr) const;

  double cosine_score(const std::vector<int>& q_tokens, const std::vector<int>& d_tokens) const;
  /// Gradients of the cosine with respect to the two pooled vectors.
  std::pair<Vec, Vec> cosine_input_grads(const std::vector<int>& q_tokens,
                                         const std::vector<int>& d_tokens) const;

 private:
  struct Pooled {
    Vec q, d;
    double nq, nd, cos;
  };
  Pooled pool_pair(const Example& e, const Perturbation* eta) const;
  std::pair<Vec, Vec> pooled_grads(const Pooled& p) const;

  Index vocab_size_;
  Index embed_dim_;
};

/// Versioned JSON checkpoint; parameters are hex-encoded IEEE-754 doubles so
/// a save/load round trip is bit-exact.
void save_checkpoint(const ScoreModel& model, const std::filesystem::path& path);
std::unique_ptr<ScoreModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace advrank
