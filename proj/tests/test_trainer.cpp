#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "advrank/losses.hpp"
#include "advrank/trainer.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <cmath>
#include <cstring>

using namespace advrank;
using namespace advrank::testing;

namespace {

MatFac seeded_mf(const RankingDataset& ds, Index k, std::uint64_t seed) {
  MatFac m(ds.num_users, ds.num_items, k);
  Rng rng(seed);
  m.init_params(rng);
  return m;
}

TrainConfig base_config(Objective objective, double epsilon) {
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.epochs = 3;
  cfg.learning_rate = 0.02;
  cfg.perturb.epsilon = epsilon;
  cfg.sampler.kind = SamplerKind::Uniform;
  cfg.seed = 31;
  return cfg;
}

bool params_identical(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

// Total losses of one epoch on a fixed dataset, without applying updates.
std::vector<double> epoch_losses(const RankingDataset& ds, ScoreModel& model,
                                 const TrainConfig& cfg) {
  NegativePool pool(ds, cfg.sampler);
  ParamGrad grad;
  grad.reset(model.param_count());
  Rng rng(cfg.seed);
  TrainState s{model, ds, pool, cfg, grad, rng};
  std::vector<double> losses;
  for (std::size_t q = 0; q < ds.queries.size(); ++q) {
    for (const int d : ds.queries[q].labeled) {
      double loss = 0.0;
      switch (cfg.objective) {
        case Objective::PlainPointwise:
          loss = step_plain_pointwise(s, static_cast<int>(q), d);
          break;
        case Objective::PlainPairwise:
          loss = step_plain_pairwise(s, static_cast<int>(q), d);
          break;
        case Objective::PointwiseAT:
          loss = step_pointwise_at(s, static_cast<int>(q), d);
          break;
        case Objective::PairwiseAT:
          loss = step_pairwise_at(s, static_cast<int>(q), d);
          break;
        case Objective::PointwiseSVAT:
          loss = step_pointwise_svat(s, static_cast<int>(q), d);
          break;
        case Objective::PairwiseSVAT:
          loss = step_pairwise_svat(s, static_cast<int>(q), d);
          break;
        case Objective::FullVAT:
          loss = step_full_vat(s, static_cast<int>(q), d, true);
          break;
      }
      losses.push_back(loss);
      grad.reset(model.param_count());  // discard: losses only
    }
  }
  return losses;
}

}  // namespace

TEST_CASE("objective names round trip") {
  for (const Objective o : {Objective::PlainPointwise, Objective::PlainPairwise,
                            Objective::PointwiseAT, Objective::PairwiseAT, Objective::FullVAT,
                            Objective::PointwiseSVAT, Objective::PairwiseSVAT}) {
    CHECK(objective_from_name(objective_name(o)) == o);
  }
  CHECK_THROWS_AS(objective_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("zero-epsilon objectives collapse to their plain counterparts") {
  const RankingDataset ds = synthetic_mf_dataset(8, 20, 4, 11);

  SUBCASE("loss values: AT doubles, SVAT matches exactly") {
    MatFac a = seeded_mf(ds, 3, 5);
    MatFac b = seeded_mf(ds, 3, 5);
    const auto at = epoch_losses(ds, a, base_config(Objective::PointwiseAT, 0.0));
    const auto plain = epoch_losses(ds, b, base_config(Objective::PlainPointwise, 0.0));
    REQUIRE(at.size() == plain.size());
    for (std::size_t i = 0; i < at.size(); ++i) {
      CHECK(std::abs(at[i] - 2.0 * plain[i]) <= 1e-12 * std::max(1.0, std::abs(at[i])));
    }

    const auto pat = epoch_losses(ds, a, base_config(Objective::PairwiseAT, 0.0));
    const auto ppl = epoch_losses(ds, b, base_config(Objective::PlainPairwise, 0.0));
    for (std::size_t i = 0; i < pat.size(); ++i) {
      CHECK(std::abs(pat[i] - 2.0 * ppl[i]) <= 1e-12 * std::max(1.0, std::abs(pat[i])));
    }

    const auto svat = epoch_losses(ds, a, base_config(Objective::PointwiseSVAT, 0.0));
    const auto psvat = epoch_losses(ds, a, base_config(Objective::PairwiseSVAT, 0.0));
    for (std::size_t i = 0; i < svat.size(); ++i) {
      CHECK(svat[i] == plain[i]);
      CHECK(psvat[i] == ppl[i]);
    }
  }

  SUBCASE("bit-identical trajectories") {
    // SVAT at epsilon 0 must track plain exactly, same learning rate
    MatFac svat_model = seeded_mf(ds, 3, 6);
    MatFac plain_model = seeded_mf(ds, 3, 6);
    train(svat_model, ds, base_config(Objective::PairwiseSVAT, 0.0));
    train(plain_model, ds, base_config(Objective::PlainPairwise, 0.0));
    CHECK(params_identical(svat_model.params_flat(), plain_model.params_flat()));

    // AT at epsilon 0 doubles every gradient: plain with a doubled learning
    // rate walks the identical trajectory
    MatFac at_model = seeded_mf(ds, 3, 6);
    MatFac plain2 = seeded_mf(ds, 3, 6);
    TrainConfig at_cfg = base_config(Objective::PairwiseAT, 0.0);
    TrainConfig plain_cfg = base_config(Objective::PlainPairwise, 0.0);
    plain_cfg.learning_rate = 2.0 * at_cfg.learning_rate;
    train(at_model, ds, at_cfg);
    train(plain2, ds, plain_cfg);
    CHECK(params_identical(at_model.params_flat(), plain2.params_flat()));

    MatFac pw_at = seeded_mf(ds, 3, 6);
    MatFac pw_plain = seeded_mf(ds, 3, 6);
    TrainConfig pw_at_cfg = base_config(Objective::PointwiseAT, 0.0);
    TrainConfig pw_plain_cfg = base_config(Objective::PlainPointwise, 0.0);
    pw_plain_cfg.learning_rate = 2.0 * pw_at_cfg.learning_rate;
    train(pw_at, ds, pw_at_cfg);
    train(pw_plain, ds, pw_plain_cfg);
    CHECK(params_identical(pw_at.params_flat(), pw_plain.params_flat()));
  }
}

TEST_CASE("step gradients match finite differences of the full objective") {
  // one user and a single-document negative pool: the sampled negative and
  // every perturbation are reproducible, so the whole multi-term objective
  // can be frozen and differentiated numerically
  RankingDataset ds;
  ds.rep = Representation::UserItemIds;
  ds.num_users = 1;
  ds.num_items = 3;
  RankingDataset::Query q;
  q.id = "u";
  q.user = 0;
  q.items = {0, 1, 2};
  q.labeled = {0};
  q.unlabeled = {1};
  ds.queries.push_back(q);

  const Example pos = Example::user_item(0, 0);
  const Example neg = Example::user_item(0, 1);

  TrainConfig cfg = base_config(Objective::PointwiseAT, 0.05);
  cfg.sampler.kind = SamplerKind::Uniform;
  const PerturbConfig& pc = cfg.perturb;

  const auto fd_against = [&](ScoreModel& model, const Vec& analytic,
                              const std::function<double()>& objective) {
    const Vec theta = model.params_flat();
    const double h = 1e-6;
    for (Index i = 0; i < theta.size(); ++i) {
      Vec probe = theta;
      probe[i] = theta[i] + h;
      model.set_params_flat(probe);
      const double fp = objective();
      probe[i] = theta[i] - h;
      model.set_params_flat(probe);
      const double fm = objective();
      const double fd = (fp - fm) / (2 * h);
      CHECK(grad_close(analytic[i], fd));
    }
    model.set_params_flat(theta);
  };

  const auto run_step = [&](ScoreModel& model, Objective obj) {
    NegativePool pool(ds, cfg.sampler);
    ParamGrad grad;
    grad.reset(model.param_count());
    Rng rng(55);
    TrainConfig step_cfg = cfg;
    step_cfg.objective = obj;
    TrainState s{model, ds, pool, step_cfg, grad, rng};
    switch (obj) {
      case Objective::PointwiseAT:
        step_pointwise_at(s, 0, 0);
        break;
      case Objective::PairwiseAT:
        step_pairwise_at(s, 0, 0);
        break;
      case Objective::PointwiseSVAT:
        step_pointwise_svat(s, 0, 0);
        break;
      default:
        step_full_vat(s, 0, 0, true);
        break;
    }
    return grad.to_dense();
  };

  SUBCASE("pointwise adversarial training (4 terms)") {
    MatFac model = seeded_mf(ds, 3, 91);
    model.set_params_flat(model.params_flat() * 8.0);
    const Vec analytic = run_step(model, Objective::PointwiseAT);
    // freeze the perturbations at the base parameters
    const Perturbation eta_pos = adversarial_perturbation(model, pos, 1, pc);
    const Perturbation eta_neg = adversarial_perturbation(model, neg, 0, pc);
    fd_against(model, analytic, [&] {
      return pointwise_ce(model.score(pos), 1).value +
             pointwise_ce(model.score(pos, &eta_pos), 1).value +
             pointwise_ce(model.score(neg), 0).value +
             pointwise_ce(model.score(neg, &eta_neg), 0).value;
    });
  }

  SUBCASE("pairwise adversarial training") {
    MatFac model = seeded_mf(ds, 3, 92);
    model.set_params_flat(model.params_flat() * 8.0);
    const Vec analytic = run_step(model, Objective::PairwiseAT);
    const PairPerturbation eta = pairwise_adversarial_perturbation(model, pos, neg, pc);
    const Perturbation eta_pos{eta.eta_q, eta.eta_dpos};
    const Perturbation eta_neg{eta.eta_q, eta.eta_dneg};
    fd_against(model, analytic, [&] {
      return pairwise_loss(model.score(pos), model.score(neg)).value +
             pairwise_loss(model.score(pos, &eta_pos), model.score(neg, &eta_neg)).value;
    });
  }

  SUBCASE("pointwise selective VAT") {
    MatFac model = seeded_mf(ds, 3, 93);
    model.set_params_flat(model.params_flat() * 8.0);
    const Vec analytic = run_step(model, Objective::PointwiseSVAT);
    // replay the step's draw sequence: KL(pos), negative sample, KL(neg)
    Rng replay(55);
    const Perturbation eta_pos = vat_perturbation(model, pos, pc, replay);
    (void)replay.uniform_index(1);
    const Perturbation eta_neg = vat_perturbation(model, neg, pc, replay);
    const double p_pos = sigmoid(model.score(pos));
    const double p_neg = sigmoid(model.score(neg));
    fd_against(model, analytic, [&] {
      return pointwise_ce(model.score(pos), 1).value +
             bernoulli_kl(p_pos, sigmoid(model.score(pos, &eta_pos))) +
             pointwise_ce(model.score(neg), 0).value +
             bernoulli_kl(p_neg, sigmoid(model.score(neg, &eta_neg)));
    });
  }

  SUBCASE("full VAT on a labeled example") {
    MatFac model = seeded_mf(ds, 3, 94);
    model.set_params_flat(model.params_flat() * 8.0);
    const Vec analytic = run_step(model, Objective::FullVAT);
    Rng replay(55);
    const Perturbation eta = vat_perturbation(model, pos, pc, replay);
    const double p_fixed = sigmoid(model.score(pos));
    fd_against(model, analytic, [&] {
      return pointwise_ce(model.score(pos), 1).value +
             bernoulli_kl(p_fixed, sigmoid(model.score(pos, &eta)));
    });
  }
}

TEST_CASE("one small step on a fixed example decreases its objective") {
  Rng rng(71);
  int improved = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    // single-user, two-item world: the pool holds exactly one negative
    RankingDataset ds;
    ds.rep = Representation::UserItemIds;
    ds.num_users = 1;
    ds.num_items = 2;
    RankingDataset::Query q;
    q.id = "u";
    q.user = 0;
    q.items = {0, 1};
    q.labeled = {0};
    q.unlabeled = {1};
    ds.queries.push_back(q);

    MatFac model(1, 2, 3);
    Rng init(rng.next_u64());
    model.init_params(init);
    // spread the parameters out so the losses are not already saturated
    model.set_params_flat(model.params_flat() * 20.0);

    TrainConfig cfg = base_config(Objective::PointwiseAT, 0.02);
    cfg.learning_rate = 1e-4;

    NegativePool pool(ds, cfg.sampler);
    ParamGrad grad;
    grad.reset(model.param_count());
    Rng step_rng(7);
    TrainState s{model, ds, pool, cfg, grad, step_rng};

    const double before = step_pointwise_at(s, 0, 0);
    grad.apply_sgd(model.params(), cfg.learning_rate);

    ParamGrad scratch;
    scratch.reset(model.param_count());
    Rng again(7);
    TrainState s2{model, ds, pool, cfg, scratch, again};
    const double after = step_pointwise_at(s2, 0, 0);
    if (after < before) {
      ++improved;
    }
  }
  CHECK(improved == trials);
}

TEST_CASE("training decreases the loss on a learnable dataset") {
  const RankingDataset ds = synthetic_mf_dataset(10, 30, 5, 19);
  MatFac model = seeded_mf(ds, 4, 20);
  TrainConfig cfg = base_config(Objective::PairwiseAT, 0.01);
  cfg.epochs = 30;
  cfg.learning_rate = 0.05;
  cfg.sampler.kind = SamplerKind::Adversarial;
  cfg.sampler.candidate_pool = 8;
  const auto logs = train(model, ds, cfg);
  REQUIRE(logs.size() == 30);
  CHECK(logs.back().mean_loss < logs.front().mean_loss);
}

TEST_CASE("one negative per positive per epoch") {
  const RankingDataset ds = synthetic_mf_dataset(6, 15, 3, 23);
  const std::uint64_t positives = ds.total_labeled();
  for (const Objective o : {Objective::PlainPairwise, Objective::PairwiseAT,
                            Objective::PointwiseAT, Objective::PointwiseSVAT,
                            Objective::PairwiseSVAT}) {
    MatFac model = seeded_mf(ds, 3, 29);
    TrainConfig cfg = base_config(o, 0.05);
    cfg.epochs = 2;
    const auto logs = train(model, ds, cfg);
    for (const auto& log : logs) {
      CHECK(log.negatives_sampled == positives);
    }
  }
  // the full virtual-adversarial pass never samples
  MatFac model = seeded_mf(ds, 3, 29);
  TrainConfig cfg = base_config(Objective::FullVAT, 0.05);
  cfg.epochs = 1;
  CHECK(train(model, ds, cfg)[0].negatives_sampled == 0);
}

TEST_CASE("full VAT pass touches labeled and unlabeled examples") {
  const RankingDataset ds = synthetic_mf_dataset(4, 10, 2, 37);
  MatFac model = seeded_mf(ds, 3, 41);
  TrainConfig cfg = base_config(Objective::FullVAT, 0.05);
  cfg.epochs = 1;
  const auto logs = train(model, ds, cfg);
  REQUIRE(logs.size() == 1);
  // mean loss is averaged over positives plus the whole unlabeled pass
  CHECK(logs[0].mean_loss >= 0.0);
  CHECK(std::isfinite(logs[0].mean_loss));
}

TEST_CASE("training with a cached sampler stays deterministic") {
  const RankingDataset ds = synthetic_mf_dataset(6, 25, 3, 79);
  TrainConfig cfg = base_config(Objective::PairwiseAT, 0.05);
  cfg.sampler.kind = SamplerKind::Adversarial;
  cfg.sampler.candidate_pool = 6;
  cfg.sampler.refresh_every_batches = 5;  // full-pool caches, refreshed lazily
  cfg.epochs = 6;
  MatFac m1 = seeded_mf(ds, 3, 81);
  MatFac m2 = seeded_mf(ds, 3, 81);
  const auto l1 = train(m1, ds, cfg);
  const auto l2 = train(m2, ds, cfg);
  CHECK(params_identical(m1.params_flat(), m2.params_flat()));
  CHECK(l1.back().mean_loss == l2.back().mean_loss);
  CHECK(l1.back().mean_loss < l1.front().mean_loss);
}

TEST_CASE("token-sequence models train through the same loop") {
  const RankingDataset ds = synthetic_token_dataset(8, 12, 30, 83);
  EmbedCosine model(30, 6);
  Rng init(89);
  model.init_params(init);
  TrainConfig cfg = base_config(Objective::PairwiseSVAT, 0.2);
  cfg.epochs = 15;
  cfg.learning_rate = 0.1;
  cfg.sampler.kind = SamplerKind::Adversarial;
  cfg.sampler.candidate_pool = 6;
  const auto logs = train(model, ds, cfg);
  CHECK(logs.back().mean_loss < logs.front().mean_loss);

  EmbedCosine again(30, 6);
  Rng init2(89);
  again.init_params(init2);
  train(again, ds, cfg);
  CHECK(params_identical(model.params_flat(), again.params_flat()));
}

TEST_CASE("train is deterministic given the seed") {
  const RankingDataset ds = synthetic_mf_dataset(7, 18, 3, 43);
  TrainConfig cfg = base_config(Objective::PairwiseSVAT, 0.1);
  cfg.sampler.kind = SamplerKind::Adversarial;
  cfg.sampler.candidate_pool = 5;
  cfg.epochs = 4;

  MatFac m1 = seeded_mf(ds, 3, 47);
  MatFac m2 = seeded_mf(ds, 3, 47);
  const auto l1 = train(m1, ds, cfg);
  const auto l2 = train(m2, ds, cfg);
  CHECK(params_identical(m1.params_flat(), m2.params_flat()));
  for (std::size_t e = 0; e < l1.size(); ++e) {
    CHECK(l1[e].mean_loss == l2[e].mean_loss);
    CHECK(l1[e].negatives_sampled == l2[e].negatives_sampled);
  }
}

TEST_CASE("batch size and weight decay are honored") {
  const RankingDataset ds = synthetic_mf_dataset(6, 15, 3, 101);

  // batched accumulation changes the trajectory but stays deterministic
  TrainConfig cfg = base_config(Objective::PlainPairwise, 0.0);
  cfg.epochs = 3;
  MatFac per_example = seeded_mf(ds, 3, 103);
  train(per_example, ds, cfg);
  cfg.batch_size = 4;
  MatFac batched1 = seeded_mf(ds, 3, 103);
  MatFac batched2 = seeded_mf(ds, 3, 103);
  train(batched1, ds, cfg);
  train(batched2, ds, cfg);
  CHECK(params_identical(batched1.params_flat(), batched2.params_flat()));
  CHECK_FALSE(params_identical(batched1.params_flat(), per_example.params_flat()));

  // decay pulls the touched parameters toward zero
  TrainConfig decay = base_config(Objective::PlainPairwise, 0.0);
  decay.epochs = 10;
  decay.weight_decay = 0.5;
  MatFac with_decay = seeded_mf(ds, 3, 107);
  MatFac without = seeded_mf(ds, 3, 107);
  train(with_decay, ds, decay);
  decay.weight_decay = 0.0;
  train(without, ds, decay);
  CHECK(with_decay.params_flat().norm() < without.params_flat().norm());
}

TEST_CASE("config and dataset validation") {
  const RankingDataset ds = synthetic_mf_dataset(3, 8, 2, 53);
  MatFac model = seeded_mf(ds, 2, 3);

  TrainConfig cfg = base_config(Objective::PlainPairwise, 0.0);
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(model, ds, cfg), std::invalid_argument);

  cfg = base_config(Objective::PlainPairwise, 0.0);
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(model, ds, cfg), std::invalid_argument);

  // empty labeled set
  RankingDataset empty = ds;
  for (auto& q : empty.queries) {
    q.labeled.clear();
  }
  cfg = base_config(Objective::PlainPairwise, 0.0);
  CHECK_THROWS_AS(train(model, empty, cfg), std::invalid_argument);

  // representation mismatch
  const RankingDataset joint = joint_dataset_from_values({0.1, 0.2}, 1);
  CHECK_THROWS_AS(train(model, joint, cfg), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const RankingDataset ds = synthetic_mf_dataset(3, 8, 2, 59);
  MatFac model = seeded_mf(ds, 2, 61);
  TrainConfig cfg = base_config(Objective::PlainPointwise, 0.0);
  cfg.learning_rate = 1e60;  // guaranteed overflow
  cfg.epochs = 50;
  CHECK_THROWS_AS(train(model, ds, cfg), TrainAbort);
}

TEST_CASE("epoch log includes periodic evaluation") {
  const RankingDataset ds = synthetic_mf_dataset(5, 12, 3, 67);
  RankingDataset eval_ds = ds;
  for (auto& q : eval_ds.queries) {
    q.grades.assign(q.num_docs(), 0.0);
    for (const int d : q.labeled) {
      q.grades[d] = 1.0;
    }
  }
  MatFac model = seeded_mf(ds, 3, 71);
  TrainConfig cfg = base_config(Objective::PlainPairwise, 0.0);
  cfg.epochs = 5;
  cfg.eval_every = 2;
  std::ostringstream log;
  const auto logs = train(model, ds, cfg, &eval_ds, &log);
  CHECK(logs[0].eval.has_value() == false);
  CHECK(logs[1].eval.has_value() == true);
  CHECK(logs[3].eval.has_value() == true);
  CHECK(logs[4].eval.has_value() == true);  // final epoch always evaluated
  CHECK(log.str().find('\t') != std::string::npos);
}
