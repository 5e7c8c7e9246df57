#include "advrank/numerics.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace advrank {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  // exp(-708) is still a positive normal double; below that it would
  // underflow to an exact 0.
  const double e = std::exp(std::max(x, -708.0));
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(std::max(x, -708.0)));
}

Vec l2_normalize(const Eigen::Ref<const Vec>& g, double epsilon) {
  const double norm = g.norm();
  if (norm <= kZeroGradThreshold) {
    return Vec::Zero(g.size());
  }
  return (epsilon / norm) * g;
}

Vec sign_scale(const Eigen::Ref<const Vec>& g, double epsilon) {
  Vec out(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const double v = g[i];
    out[i] = v > 0.0 ? epsilon : (v < 0.0 ? -epsilon : 0.0);
  }
  return out;
}

Vec softmax_with_temperature(const Eigen::Ref<const Vec>& scores, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("softmax_with_temperature: tau must be > 0");
  }
  if (scores.size() == 0) {
    throw std::invalid_argument("softmax_with_temperature: empty scores");
  }
  Vec scaled = scores / tau;
  const double m = scaled.maxCoeff();
  Vec e = (scaled.array() - m).exp();
  return e / e.sum();
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f,
                     const Eigen::Ref<const Vec>& x, double h) {
  Vec grad(x.size());
  Vec probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_grad: non-finite function value");
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

namespace {

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix_finalize(base + 0x9e3779b97f4a7c15ULL * (2 * stream + 1));
}

std::string format_shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return splitmix_finalize(state_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= rem) {
      return (r - rem) % n;
    }
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Vec Rng::normal_vec(Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = normal();
  }
  return v;
}

}  // namespace advrank
