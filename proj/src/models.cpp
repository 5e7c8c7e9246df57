#include "advrank/models.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace advrank {

// ---------------------------------------------------------------------------
// ParamGrad

void ParamGrad::reset(Index n) {
  if (dense_.size() != n) {
    dense_ = Vec::Zero(n);
    is_touched_.assign(static_cast<std::size_t>(n), 0);
    touched_.clear();
  } else {
    for (const Index i : touched_) {
      dense_[i] = 0.0;
      is_touched_[static_cast<std::size_t>(i)] = 0;
    }
    touched_.clear();
  }
}

void ParamGrad::add(Index i, double v) {
  if (!is_touched_[static_cast<std::size_t>(i)]) {
    is_touched_[static_cast<std::size_t>(i)] = 1;
    touched_.push_back(i);
    dense_[i] = v;
  } else {
    dense_[i] += v;
  }
}

void ParamGrad::add_segment(Index base, const Eigen::Ref<const Vec>& g, double scale) {
  for (Index i = 0; i < g.size(); ++i) {
    add(base + i, scale * g[i]);
  }
}

void ParamGrad::apply_sgd(Vec& params, double lr, double weight_decay) {
  for (const Index i : touched_) {
    double g = dense_[i];
    if (weight_decay != 0.0) {
      g += weight_decay * params[i];
    }
    params[i] -= lr * g;
    dense_[i] = 0.0;
    is_touched_[static_cast<std::size_t>(i)] = 0;
  }
  touched_.clear();
}

Vec ParamGrad::to_dense() const { return dense_; }

// ---------------------------------------------------------------------------
// RankMlp

RankMlp::RankMlp(Index input_dim, Index hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw std::invalid_argument("RankMlp: dimensions must be positive");
  }
  params_ = Vec::Zero(hidden_dim_ * input_dim_ + hidden_dim_ + hidden_dim_ + 1);
}

Eigen::Map<const Mat> RankMlp::w1() const {
  return {params_.data(), hidden_dim_, input_dim_};
}

Eigen::Map<const Vec> RankMlp::b1() const {
  return {params_.data() + hidden_dim_ * input_dim_, hidden_dim_};
}

Eigen::Map<const Vec> RankMlp::w2() const {
  return {params_.data() + hidden_dim_ * input_dim_ + hidden_dim_, hidden_dim_};
}

Vec RankMlp::perturbed_input(const Example& e, const Perturbation* eta) const {
  if (e.features_size != input_dim_) {
    throw std::invalid_argument("RankMlp: feature vector has wrong dimension");
  }
  if (eta && eta->eta_q) {
    throw std::invalid_argument("RankMlp: joint-input model has no query slot");
  }
  Vec x = e.features();
  if (eta && eta->eta_d) {
    if (eta->eta_d->size() != input_dim_) {
      throw std::invalid_argument("RankMlp: perturbation has wrong dimension");
    }
    x += *eta->eta_d;
  }
  return x;
}

double RankMlp::score_features(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != input_dim_) {
    throw std::invalid_argument("RankMlp: feature vector has wrong dimension");
  }
  const Vec h = (w1() * x + b1()).cwiseMax(0.0);
  return w2().dot(h) + b2();
}

Vec RankMlp::input_grad_features(const Eigen::Ref<const Vec>& x, double upstream) const {
  if (x.size() != input_dim_) {
    throw std::invalid_argument("RankMlp: feature vector has wrong dimension");
  }
  const Vec z = w1() * x + b1();
  Vec a(hidden_dim_);
  for (Index r = 0; r < hidden_dim_; ++r) {
    a[r] = z[r] > 0.0 ? w2()[r] : 0.0;
  }
  return upstream * (w1().transpose() * a);
}

double RankMlp::score(const Example& e, const Perturbation* eta) const {
  return score_features(perturbed_input(e, eta));
}

InputGrads RankMlp::input_grads(const Example& e, double upstream, const Perturbation* eta) const {
  InputGrads g;
  g.d = input_grad_features(perturbed_input(e, eta), upstream);
  return g;
}

SlotDims RankMlp::slot_dims(const Example& e) const {
  if (e.features_size != input_dim_) {
    throw std::invalid_argument("RankMlp: feature vector has wrong dimension");
  }
  return SlotDims{std::nullopt, input_dim_};
}

void RankMlp::accumulate_param_grad(const Example& e, double upstream, const Perturbation* eta,
                                    ParamGrad& acc) const {
  if (upstream == 0.0) {
    return;
  }
  const Vec x = perturbed_input(e, eta);
  const Vec z = w1() * x + b1();
  const Index w1_end = hidden_dim_ * input_dim_;
  for (Index r = 0; r < hidden_dim_; ++r) {
    const double h = z[r] > 0.0 ? z[r] : 0.0;
    // d f / d w2[r] = h
    acc.add(w1_end + hidden_dim_ + r, upstream * h);
    if (z[r] > 0.0) {
      const double s = upstream * w2()[r];
      acc.add_segment(r * input_dim_, x, s);  // d f / d W1 row r
      acc.add(w1_end + r, s);                 // d f / d b1[r]
    }
  }
  acc.add(params_.size() - 1, upstream);  // d f / d b2
}

void RankMlp::set_params_flat(const Eigen::Ref<const Vec>& theta) {
  if (theta.size() != params_.size()) {
    throw std::invalid_argument("RankMlp: parameter vector has wrong size");
  }
  params_ = theta;
}

void RankMlp::init_params(Rng& rng) {
  params_.setZero();
  for (Index i = 0; i < hidden_dim_ * input_dim_; ++i) {
    params_[i] = rng.uniform(-0.05, 0.05);
  }
  const Index w2_base = hidden_dim_ * input_dim_ + hidden_dim_;
  for (Index i = 0; i < hidden_dim_; ++i) {
    params_[w2_base + i] = rng.uniform(-0.05, 0.05);
  }
}

// ---------------------------------------------------------------------------
// MatFac

MatFac::MatFac(Index num_users, Index num_items, Index latent_dim)
    : num_users_(num_users), num_items_(num_items), latent_dim_(latent_dim) {
  if (num_users < 1 || num_items < 1 || latent_dim < 1) {
    throw std::invalid_argument("MatFac: dimensions must be positive");
  }
  params_ = Vec::Zero((num_users_ + num_items_) * latent_dim_ + num_items_);
}

Eigen::Map<const Vec> MatFac::user_vec(Index u) const {
  return {params_.data() + u * latent_dim_, latent_dim_};
}

Eigen::Map<const Vec> MatFac::item_vec(Index i) const {
  return {params_.data() + (num_users_ + i) * latent_dim_, latent_dim_};
}

double MatFac::item_bias(Index i) const {
  return params_[(num_users_ + num_items_) * latent_dim_ + i];
}

void MatFac::check_ids(const Example& e) const {
  if (e.user < 0 || e.user >= num_users_) {
    throw std::out_of_range("MatFac: user id out of range");
  }
  if (e.item < 0 || e.item >= num_items_) {
    throw std::out_of_range("MatFac: item id out of range");
  }
}

double MatFac::score_ids(Index u, Index i) const {
  Example e;
  e.user = static_cast<int>(u);
  e.item = static_cast<int>(i);
  return score(e);
}

std::pair<Vec, Vec> MatFac::input_grad_vectors(Index u, Index i) const {
  if (u < 0 || u >= num_users_ || i < 0 || i >= num_items_) {
    throw std::out_of_range("MatFac: id out of range");
  }
  return {Vec(item_vec(i)), Vec(user_vec(u))};
}

double MatFac::score(const Example& e, const Perturbation* eta) const {
  check_ids(e);
  const auto vu = user_vec(e.user);
  const auto vi = item_vec(e.item);
  double f;
  if (eta && (eta->eta_q || eta->eta_d)) {
    Vec pu = vu;
    Vec pi = vi;
    if (eta->eta_q) {
      pu += *eta->eta_q;
    }
    if (eta->eta_d) {
      pi += *eta->eta_d;
    }
    f = pu.dot(pi);
  } else {
    f = vu.dot(vi);
  }
  return f + item_bias(e.item);
}

InputGrads MatFac::input_grads(const Example& e, double upstream, const Perturbation* eta) const {
  check_ids(e);
  Vec pu = user_vec(e.user);
  Vec pi = item_vec(e.item);
  if (eta && eta->eta_q) {
    pu += *eta->eta_q;
  }
  if (eta && eta->eta_d) {
    pi += *eta->eta_d;
  }
  InputGrads g;
  g.q = upstream * pi;
  g.d = upstream * pu;
  return g;
}

SlotDims MatFac::slot_dims(const Example& e) const {
  check_ids(e);
  return SlotDims{latent_dim_, latent_dim_};
}

void MatFac::accumulate_param_grad(const Example& e, double upstream, const Perturbation* eta,
                                   ParamGrad& acc) const {
  check_ids(e);
  if (upstream == 0.0) {
    return;
  }
  Vec pu = user_vec(e.user);
  Vec pi = item_vec(e.item);
  if (eta && eta->eta_q) {
    pu += *eta->eta_q;
  }
  if (eta && eta->eta_d) {
    pi += *eta->eta_d;
  }
  acc.add_segment(e.user * latent_dim_, pi, upstream);
  acc.add_segment((num_users_ + e.item) * latent_dim_, pu, upstream);
  acc.add((num_users_ + num_items_) * latent_dim_ + e.item, upstream);
}

void MatFac::set_params_flat(const Eigen::Ref<const Vec>& theta) {
  if (theta.size() != params_.size()) {
    throw std::invalid_argument("MatFac: parameter vector has wrong size");
  }
  params_ = theta;
}

void MatFac::init_params(Rng& rng) {
  params_.setZero();
  for (Index i = 0; i < (num_users_ + num_items_) * latent_dim_; ++i) {
    params_[i] = rng.uniform(-0.05, 0.05);
  }
}

// ---------------------------------------------------------------------------
// EmbedCosine

EmbedCosine::EmbedCosine(Index vocab_size, Index embed_dim)
    : vocab_size_(vocab_size), embed_dim_(embed_dim) {
  if (vocab_size < 1 || embed_dim < 1) {
    throw std::invalid_argument("EmbedCosine: dimensions must be positive");
  }
  params_ = Vec::Zero(vocab_size_ * embed_dim_);
}

Eigen::Map<const Mat> EmbedCosine::embeddings() const {
  return {params_.data(), vocab_size_, embed_dim_};
}

Vec EmbedCosine::pooled(const std::vector<int>& tokens, const Vec* eta) const {
  if (tokens.empty()) {
    throw std::invalid_argument("EmbedCosine: empty token sequence");
  }
  const auto z = embeddings();
  Vec v = Vec::Zero(embed_dim_);
  for (const int t : tokens) {
    if (t < 0 || t >= vocab_size_) {
      throw std::out_of_range("EmbedCosine: token id out of range");
    }
    v += z.row(t);
  }
  v /= static_cast<double>(tokens.size());
  if (eta) {
    if (eta->size() != vocab_size_) {
      throw std::invalid_argument("EmbedCosine: perturbation must live in vocabulary space");
    }
    v += z.transpose() * (*eta);
  }
  return v;
}

EmbedCosine::Pooled EmbedCosine::pool_pair(const Example& e, const Perturbation* eta) const {
  if (!e.query_tokens || !e.doc_tokens) {
    throw std::invalid_argument("EmbedCosine: example lacks token sequences");
  }
  Pooled p;
  p.q = pooled(*e.query_tokens, eta && eta->eta_q ? &*eta->eta_q : nullptr);
  p.d = pooled(*e.doc_tokens, eta && eta->eta_d ? &*eta->eta_d : nullptr);
  p.nq = p.q.norm();
  p.nd = p.d.norm();
  if (p.nq <= 1e-12 || p.nd <= 1e-12) {
    throw std::domain_error("EmbedCosine: pooled vector has near-zero norm");
  }
  p.cos = p.q.dot(p.d) / (p.nq * p.nd);
  return p;
}

std::pair<Vec, Vec> EmbedCosine::pooled_grads(const Pooled& p) const {
  Vec dq = p.d / (p.nq * p.nd) - (p.cos / (p.nq * p.nq)) * p.q;
  Vec dd = p.q / (p.nq * p.nd) - (p.cos / (p.nd * p.nd)) * p.d;
  return {std::move(dq), std::move(dd)};
}

double EmbedCosine::cosine_score(const std::vector<int>& q_tokens,
                                 const std::vector<int>& d_tokens) const {
  return score(Example::tokens(q_tokens, d_tokens));
}

std::pair<Vec, Vec> EmbedCosine::cosine_input_grads(const std::vector<int>& q_tokens,
                                                    const std::vector<int>& d_tokens) const {
  return pooled_grads(pool_pair(Example::tokens(q_tokens, d_tokens), nullptr));
}

double EmbedCosine::score(const Example& e, const Perturbation* eta) const {
  return pool_pair(e, eta).cos;
}

InputGrads EmbedCosine::input_grads(const Example& e, double upstream,
                                    const Perturbation* eta) const {
  const Pooled p = pool_pair(e, eta);
  const auto [dq, dd] = pooled_grads(p);
  const auto z = embeddings();
  InputGrads g;
  g.q = upstream * (z * dq);
  g.d = upstream * (z * dd);
  return g;
}

SlotDims EmbedCosine::slot_dims(const Example&) const {
  return SlotDims{vocab_size_, vocab_size_};
}

void EmbedCosine::accumulate_param_grad(const Example& e, double upstream,
                                        const Perturbation* eta, ParamGrad& acc) const {
  if (upstream == 0.0) {
    return;
  }
  const Pooled p = pool_pair(e, eta);
  const auto [dq, dd] = pooled_grads(p);

  const auto side = [&](const std::vector<int>& tokens, const Vec* side_eta, const Vec& dpooled) {
    const double inv = upstream / static_cast<double>(tokens.size());
    for (const int t : tokens) {
      acc.add_segment(static_cast<Index>(t) * embed_dim_, dpooled, inv);
    }
    if (side_eta) {
      for (Index w = 0; w < vocab_size_; ++w) {
        const double c = (*side_eta)[w];
        if (c != 0.0) {
          acc.add_segment(w * embed_dim_, dpooled, upstream * c);
        }
      }
    }
  };
  side(*e.query_tokens, eta && eta->eta_q ? &*eta->eta_q : nullptr, dq);
  side(*e.doc_tokens, eta && eta->eta_d ? &*eta->eta_d : nullptr, dd);
}

void EmbedCosine::set_params_flat(const Eigen::Ref<const Vec>& theta) {
  if (theta.size() != params_.size()) {
    throw std::invalid_argument("EmbedCosine: parameter vector has wrong size");
  }
  params_ = theta;
}

void EmbedCosine::init_params(Rng& rng) {
  for (Index i = 0; i < params_.size(); ++i) {
    params_[i] = rng.uniform(-0.05, 0.05);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::string encode_params_hex(const Vec& params) {
  std::string out;
  out.reserve(static_cast<std::size_t>(params.size()) * 16);
  char buf[17];
  for (Index i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params[i]);
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
    out.append(buf, 16);
  }
  return out;
}

Vec decode_params_hex(const std::string& hex) {
  if (hex.size() % 16 != 0) {
    throw std::runtime_error("checkpoint: malformed parameter encoding");
  }
  Vec params(static_cast<Index>(hex.size() / 16));
  for (Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits = 0;
    for (int j = 0; j < 16; ++j) {
      const char c = hex[static_cast<std::size_t>(i) * 16 + j];
      std::uint64_t digit;
      if (c >= '0' && c <= '9') {
        digit = static_cast<std::uint64_t>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        digit = static_cast<std::uint64_t>(c - 'a' + 10);
      } else {
        throw std::runtime_error("checkpoint: invalid hex digit");
      }
      bits = (bits << 4) | digit;
    }
    params[i] = std::bit_cast<double>(bits);
  }
  return params;
}

}  // namespace

void save_checkpoint(const ScoreModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "advrank.model";
  j["version"] = 1;
  j["kind"] = model.kind();
  nlohmann::json dims;
  if (const auto* mlp = dynamic_cast<const RankMlp*>(&model)) {
    dims["input_dim"] = mlp->input_dim();
    dims["hidden_dim"] = mlp->hidden_dim();
  } else if (const auto* mf = dynamic_cast<const MatFac*>(&model)) {
    dims["num_users"] = mf->num_users();
    dims["num_items"] = mf->num_items();
    dims["latent_dim"] = mf->latent_dim();
  } else if (const auto* ec = dynamic_cast<const EmbedCosine*>(&model)) {
    dims["vocab_size"] = ec->vocab_size();
    dims["embed_dim"] = ec->embed_dim();
  } else {
    throw std::invalid_argument("save_checkpoint: unknown model kind");
  }
  j["dims"] = dims;
  j["params_hex"] = encode_params_hex(model.params());

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  }
  out << j.dump(2) << '\n';
}

std::unique_ptr<ScoreModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  }
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "advrank.model" || j.value("version", 0) != 1) {
    throw std::runtime_error("load_checkpoint: unsupported container format");
  }
  const std::string kind = j.at("kind");
  const auto& dims = j.at("dims");
  std::unique_ptr<ScoreModel> model;
  if (kind == "rank_mlp") {
    model = std::make_unique<RankMlp>(dims.at("input_dim").get<Index>(),
                                      dims.at("hidden_dim").get<Index>());
  } else if (kind == "mat_fac") {
    model = std::make_unique<MatFac>(dims.at("num_users").get<Index>(),
                                     dims.at("num_items").get<Index>(),
                                     dims.at("latent_dim").get<Index>());
  } else if (kind == "embed_cosine") {
    model = std::make_unique<EmbedCosine>(dims.at("vocab_size").get<Index>(),
                                          dims.at("embed_dim").get<Index>());
  } else {
    throw std::runtime_error("load_checkpoint: unknown model kind '" + kind + "'");
  }
  const Vec params = decode_params_hex(j.at("params_hex").get<std::string>());
  model->set_params_flat(params);
  return model;
}

}  // namespace advrank
