#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace advrank {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Gradients with L2 norm at or below this are treated as zero: the loss is
/// locally flat, so no ascent direction exists to first order.
inline constexpr double kZeroGradThreshold = 1e-12;

/// 1/(1+exp(-x)), saturating instead of under/overflowing for |x| > ~708.
double sigmoid(double x);

/// log(1+exp(x)) without overflow for large |x|.
double softplus(double x);

/// epsilon * g / ||g||_2, or the zero vector when ||g||_2 <= kZeroGradThreshold.
Vec l2_normalize(const Eigen::Ref<const Vec>& g, double epsilon);

/// epsilon * sign(g) elementwise, with sign(0) = 0.
Vec sign_scale(const Eigen::Ref<const Vec>& g, double epsilon);

/// softmax(scores / tau) with a max shift so exp never overflows.
/// Throws std::invalid_argument for tau <= 0 or empty scores.
Vec softmax_with_temperature(const Eigen::Ref<const Vec>& scores, double tau);

/// Central-difference gradient of f at x with step h. Throws std::runtime_error
/// if any probe evaluation is non-finite.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f,
                     const Eigen::Ref<const Vec>& x, double h = 1e-5);

/// Derive an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Shortest decimal text that parses back to exactly v.
std::string format_shortest(double v);

/// Counter-based deterministic generator (splitmix64). Identical seed and call
/// sequence give an identical draw sequence; single-owner, never shared across
/// concurrent tasks.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n); n must be positive. Exactly uniform
  /// (rejection sampling, no modulo bias).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (second value cached).
  double normal();

  Vec normal_vec(Index n);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Child generator for an independent stream; does not advance this one.
  Rng fork(std::uint64_t stream) const { return Rng(derive_seed(state_, stream)); }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace advrank
