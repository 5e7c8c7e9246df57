#pragma once

// Minimal joint-input scorer f(x) = w.x + b used as a transparent test
// subject: every gradient is known in closed form.

#include "advrank/models.hpp"

namespace advrank::testing {

class LinearJointModel final : public ScoreModel {
 public:
  LinearJointModel(const Vec& w, double b) : dim_(w.size()) {
    params_.resize(dim_ + 1);
    params_.head(dim_) = w;
    params_[dim_] = b;
  }

  Representation representation() const override { return Representation::JointFeatures; }
  std::string kind() const override { return "linear_joint"; }

  Vec weights() const { return params_.head(dim_); }

  double score(const Example& e, const Perturbation* eta = nullptr) const override {
    Vec x = e.features();
    if (eta && eta->eta_d) {
      x += *eta->eta_d;
    }
    return params_.head(dim_).dot(x) + params_[dim_];
  }

  InputGrads input_grads(const Example&, double upstream,
                         const Perturbation* = nullptr) const override {
    InputGrads g;
    g.d = upstream * params_.head(dim_);
    return g;
  }

  SlotDims slot_dims(const Example&) const override { return SlotDims{std::nullopt, dim_}; }

  void accumulate_param_grad(const Example& e, double upstream, const Perturbation* eta,
                             ParamGrad& acc) const override {
    if (upstream == 0.0) {
      return;
    }
    Vec x = e.features();
    if (eta && eta->eta_d) {
      x += *eta->eta_d;
    }
    acc.add_segment(0, x, upstream);
    acc.add(dim_, upstream);
  }

  Index param_count() const override { return params_.size(); }
  Vec params_flat() const override { return params_; }
  void set_params_flat(const Eigen::Ref<const Vec>& theta) override { params_ = theta; }
  void init_params(Rng& rng) override {
    for (Index i = 0; i < dim_; ++i) {
      params_[i] = rng.uniform(-0.05, 0.05);
    }
    params_[dim_] = 0.0;
  }

 private:
  Index dim_;
};

}  // namespace advrank::testing
