#include "advrank/trainer.hpp"

#include "advrank/losses.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace advrank {

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::PlainPointwise:
      return "plain_pointwise";
    case Objective::PlainPairwise:
      return "plain_pairwise";
    case Objective::PointwiseAT:
      return "pointwise_at";
    case Objective::PairwiseAT:
      return "pairwise_at";
    case Objective::FullVAT:
      return "full_vat";
    case Objective::PointwiseSVAT:
      return "pointwise_svat";
    case Objective::PairwiseSVAT:
      return "pairwise_svat";
  }
  return "unknown";
}

Objective objective_from_name(const std::string& name) {
  for (const Objective o :
       {Objective::PlainPointwise, Objective::PlainPairwise, Objective::PointwiseAT,
        Objective::PairwiseAT, Objective::FullVAT, Objective::PointwiseSVAT,
        Objective::PairwiseSVAT}) {
    if (objective_name(o) == name) {
      return o;
    }
  }
  throw std::invalid_argument("unknown objective '" + name + "'");
}

bool objective_is_pairwise(Objective o) {
  return o == Objective::PlainPairwise || o == Objective::PairwiseAT ||
         o == Objective::PairwiseSVAT;
}

namespace {

// Clean cross entropy plus the adversarially perturbed copy. When the
// perturbation is disabled (epsilon == 0) both terms coincide, so the model
// is evaluated once with the upstream derivatives summed; this keeps the
// epsilon = 0 configuration exactly equivalent to the plain objective.
double at_ce_terms(TrainState& s, const Example& e, int y) {
  const double f = s.model.score(e);
  const LossValue clean = pointwise_ce(f, y);
  const double alpha = s.cfg.alpha;

  if (s.cfg.perturb.epsilon == 0.0) {
    s.model.accumulate_param_grad(e, (1.0 + alpha) * clean.d_score, nullptr, s.grad);
    return (1.0 + alpha) * clean.value;
  }

  const Perturbation eta = adversarial_perturbation(s.model, e, y, s.cfg.perturb);
  const double f_adv = s.model.score(e, &eta);
  const LossValue adv = pointwise_ce(f_adv, y);
  s.model.accumulate_param_grad(e, clean.d_score, nullptr, s.grad);
  s.model.accumulate_param_grad(e, alpha * adv.d_score, &eta, s.grad);
  return clean.value + alpha * adv.value;
}

// alpha * J_KL for one example: virtual-adversarial perturbation, KL value,
// and the parameter gradient through the perturbed (second) argument only.
// epsilon == 0 contributes exactly nothing and draws no randomness.
double kl_term(TrainState& s, const Example& e) {
  if (s.cfg.perturb.epsilon == 0.0) {
    return 0.0;
  }
  const Perturbation eta = vat_perturbation(s.model, e, s.cfg.perturb, s.rng);
  const double p = sigmoid(s.model.score(e));
  const double f_pert = s.model.score(e, &eta);
  const double pp = sigmoid(f_pert);
  const double kl = bernoulli_kl(p, pp);
  const double upstream = s.cfg.alpha * bernoulli_kl_dp_prime(p, pp) * pp * (1.0 - pp);
  s.model.accumulate_param_grad(e, upstream, &eta, s.grad);
  return s.cfg.alpha * kl;
}

}  // namespace

double step_plain_pointwise(TrainState& s, int query_idx, int pos_doc) {
  const Example pos = s.ds.example(query_idx, pos_doc);
  const LossValue ce_pos = pointwise_ce(s.model.score(pos), 1);
  s.model.accumulate_param_grad(pos, ce_pos.d_score, nullptr, s.grad);

  const int neg_doc = s.pool.sample(query_idx, s.model, s.cfg.sampler, s.rng);
  const Example neg = s.ds.example(query_idx, neg_doc);
  const LossValue ce_neg = pointwise_ce(s.model.score(neg), 0);
  s.model.accumulate_param_grad(neg, ce_neg.d_score, nullptr, s.grad);
  return ce_pos.value + ce_neg.value;
}

double step_plain_pairwise(TrainState& s, int query_idx, int pos_doc) {
  const int neg_doc = s.pool.sample(query_idx, s.model, s.cfg.sampler, s.rng);
  const Example pos = s.ds.example(query_idx, pos_doc);
  const Example neg = s.ds.example(query_idx, neg_doc);
  const LossValue clean = pairwise_loss(s.model.score(pos), s.model.score(neg));
  s.model.accumulate_param_grad(pos, clean.d_score, nullptr, s.grad);
  s.model.accumulate_param_grad(neg, -clean.d_score, nullptr, s.grad);
  return clean.value;
}

double step_pointwise_at(TrainState& s, int query_idx, int pos_doc) {
  double loss = at_ce_terms(s, s.ds.example(query_idx, pos_doc), 1);
  const int neg_doc = s.pool.sample(query_idx, s.model, s.cfg.sampler, s.rng);
  loss += at_ce_terms(s, s.ds.example(query_idx, neg_doc), 0);
  return loss;
}

double step_pairwise_at(TrainState& s, int query_idx, int pos_doc) {
  const int neg_doc = s.pool.sample(query_idx, s.model, s.cfg.sampler, s.rng);
  const Example pos = s.ds.example(query_idx, pos_doc);
  const Example neg = s.ds.example(query_idx, neg_doc);
  const LossValue clean = pairwise_loss(s.model.score(pos), s.model.score(neg));
  const double alpha = s.cfg.alpha;

  if (s.cfg.perturb.epsilon == 0.0) {
    const double u = (1.0 + alpha) * clean.d_score;
    s.model.accumulate_param_grad(pos, u, nullptr, s.grad);
    s.model.accumulate_param_grad(neg, -u, nullptr, s.grad);
    return (1.0 + alpha) * clean.value;
  }

  const PairPerturbation eta = pairwise_adversarial_perturbation(s.model, pos, neg, s.cfg.perturb);
  Perturbation eta_pos{eta.eta_q, eta.eta_dpos};
  Perturbation eta_neg{eta.eta_q, eta.eta_dneg};
  const LossValue adv = pairwise_loss(s.model.score(pos, &eta_pos), s.model.score(neg, &eta_neg));
  s.model.accumulate_param_grad(pos, clean.d_score, nullptr, s.grad);
  s.model.accumulate_param_grad(neg, -clean.d_score, nullptr, s.grad);
  s.model.accumulate_param_grad(pos, alpha * adv.d_score, &eta_pos, s.grad);
  s.model.accumulate_param_grad(neg, -alpha * adv.d_score, &eta_neg, s.grad);
  return clean.value + alpha * adv.value;
}

double step_pointwise_svat(TrainState& s, int query_idx, int pos_doc) {
  const Example pos = s.ds.example(query_idx, pos_doc);
  const LossValue ce_pos = pointwise_ce(s.model.score(pos), 1);
  s.model.accumulate_param_grad(pos, ce_pos.d_score, nullptr, s.grad);
  double loss = ce_pos.value + kl_term(s, pos);

  const int neg_doc = s.pool.sample(query_idx, s.model, s.cfg.sampler, s.rng);
  const Example neg = s.ds.example(query_idx, neg_doc);
  const LossValue ce_neg = pointwise_ce(s.model.score(neg), 0);
  s.model.accumulate_param_grad(neg, ce_neg.d_score, nullptr, s.grad);
  loss += ce_neg.value + kl_term(s, neg);
  return loss;
}

double step_pairwise_svat(TrainState& s, int query_idx, int pos_doc) {
  const int neg_doc = s.pool.sample(query_idx, s.model, s.cfg.sampler, s.rng);
  const Example pos = s.ds.example(query_idx, pos_doc);
  const Example neg = s.ds.example(query_idx, neg_doc);
  const LossValue clean = pairwise_loss(s.model.score(pos), s.model.score(neg));
  s.model.accumulate_param_grad(pos, clean.d_score, nullptr, s.grad);
  s.model.accumulate_param_grad(neg, -clean.d_score, nullptr, s.grad);
  return clean.value + kl_term(s, pos) + kl_term(s, neg);
}

double step_full_vat(TrainState& s, int query_idx, int doc, bool labeled) {
  const Example e = s.ds.example(query_idx, doc);
  double loss = 0.0;
  if (labeled) {
    const LossValue ce = pointwise_ce(s.model.score(e), 1);
    s.model.accumulate_param_grad(e, ce.d_score, nullptr, s.grad);
    loss += ce.value;
  }
  return loss + kl_term(s, e);
}

namespace {

struct Event {
  int query = 0;
  int doc = 0;
  bool labeled = true;
};

double dispatch(TrainState& s, Objective objective, const Event& ev) {
  switch (objective) {
    case Objective::PlainPointwise:
      return step_plain_pointwise(s, ev.query, ev.doc);
    case Objective::PlainPairwise:
      return step_plain_pairwise(s, ev.query, ev.doc);
    case Objective::PointwiseAT:
      return step_pointwise_at(s, ev.query, ev.doc);
    case Objective::PairwiseAT:
      return step_pairwise_at(s, ev.query, ev.doc);
    case Objective::PointwiseSVAT:
      return step_pointwise_svat(s, ev.query, ev.doc);
    case Objective::PairwiseSVAT:
      return step_pairwise_svat(s, ev.query, ev.doc);
    case Objective::FullVAT:
      return step_full_vat(s, ev.query, ev.doc, ev.labeled);
  }
  throw std::logic_error("unreachable objective");
}

}  // namespace

std::vector<EpochLog> train(ScoreModel& model, const RankingDataset& ds, const TrainConfig& cfg,
                            const RankingDataset* eval_ds, std::ostream* log) {
  if (cfg.epochs < 1) {
    throw std::invalid_argument("train: epochs must be >= 1");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("train: learning rate must be > 0");
  }
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("train: batch size must be >= 1");
  }
  if (cfg.perturb.epsilon < 0.0) {
    throw std::invalid_argument("train: epsilon must be >= 0");
  }
  if (model.representation() != ds.rep) {
    throw std::invalid_argument("train: model and dataset representations differ");
  }
  if (ds.total_labeled() == 0) {
    throw std::invalid_argument("train: dataset has no labeled examples");
  }

  std::vector<Event> events;
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& q = ds.queries[qi];
    for (const int d : q.labeled) {
      events.push_back({static_cast<int>(qi), d, true});
    }
    if (cfg.objective == Objective::FullVAT) {
      for (const int d : q.unlabeled) {
        events.push_back({static_cast<int>(qi), d, false});
      }
    }
  }

  Rng rng(cfg.seed);
  NegativePool pool(ds, cfg.sampler);
  ParamGrad grad;
  grad.reset(model.param_count());
  TrainState state{model, ds, pool, cfg, grad, rng};

  std::vector<EpochLog> logs;
  logs.reserve(cfg.epochs);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t samples_before = pool.samples_drawn();
    rng.shuffle(events);
    double total_loss = 0.0;
    int in_batch = 0;
    for (const Event& ev : events) {
      const double loss = dispatch(state, cfg.objective, ev);
      if (!std::isfinite(loss)) {
        throw TrainAbort("non-finite loss at epoch " + std::to_string(epoch) + ", query " +
                         ds.queries[ev.query].id + ", doc " + std::to_string(ev.doc));
      }
      total_loss += loss;
      if (++in_batch == cfg.batch_size) {
        grad.apply_sgd(model.params(), cfg.learning_rate, cfg.weight_decay);
        pool.tick_batch();
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      grad.apply_sgd(model.params(), cfg.learning_rate, cfg.weight_decay);
      pool.tick_batch();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = total_loss / static_cast<double>(events.size());
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    entry.negatives_sampled = pool.samples_drawn() - samples_before;
    if (eval_ds && cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      entry.eval = evaluate(model, *eval_ds, cfg.eval_cutoffs);
      entry.eval->seed = cfg.seed;
      entry.eval->epoch = epoch;
    }
    if (log) {
      *log << epoch << '\t' << format_sig9(entry.mean_loss) << '\t' << format_sig9(entry.seconds);
      if (entry.eval) {
        for (std::size_t c = 0; c < entry.eval->cutoffs.size(); ++c) {
          *log << '\t' << format_sig9(entry.eval->mean_precision[c]);
        }
        for (std::size_t c = 0; c < entry.eval->cutoffs.size(); ++c) {
          *log << '\t' << format_sig9(entry.eval->mean_ndcg[c]);
        }
      }
      *log << '\n';
    }
    logs.push_back(std::move(entry));
  }
  return logs;
}

}  // namespace advrank
