#pragma once

// Data-generating distributions: the two-atom least-squares trap, the
// conditional-moment necessity construction, benign and heavy-tailed
// sampling worlds, plus exact risk oracles for finite-support worlds.

#include "dfreg/model.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace dfreg::worlds {

/// Scalar response map f with f(0) = 0: either x -> scale * x or a lookup
/// table of (x, f(x)) pairs.
struct ScalarMap {
  double scale = 1.0;
  std::vector<std::pair<double, double>> table;

  [[nodiscard]] double operator()(double x) const;
  /// sup_x |f(x)|; infinite for the linear form with non-zero scale.
  [[nodiscard]] double sup_abs() const;
};

struct BadTruncSpec {
  int n = 2;
  double m = 1.0;
};

struct NecessitySpec {
  int n = 1;
  double delta = 0.5;
  std::optional<double> x0;  // defaults to sqrt(n)
  double f_scale = 1.0;
  std::vector<std::pair<double, double>> f_table;

  [[nodiscard]] ScalarMap map() const { return {f_scale, f_table}; }
  [[nodiscard]] double point() const;
};

/// X ~ N(0, I_d), Y = clamp(<w0, X>, +-m_clip) + uniform noise with standard
/// deviation noise_std.
struct GaussianLinearSpec {
  int d = 1;
  double noise_std = 0.0;
  double m_clip = 1.0;
  std::optional<Vector> w0;  // defaults to (1, ..., 1) / sqrt(d)
};

/// X = R * U with R ~ Pareto(1, tail_index) and U uniform on the sphere;
/// Y = clamp(<w0, X>, +-m/2) + Uniform[-m/2, m/2].
struct HeavyTailCovSpec {
  int d = 1;
  double tail_index = 3.0;
  double m = 1.0;
  std::optional<Vector> w0;
};

struct FiniteCustomSpec {
  std::vector<Atom> atoms;
  std::optional<double> declared_m;
};

using WorldSpec = std::variant<BadTruncSpec, NecessitySpec, GaussianLinearSpec, HeavyTailCovSpec, FiniteCustomSpec>;

/// A distribution known only through a seeded generator.
class SamplingWorld {
 public:
  using Params = std::variant<GaussianLinearSpec, HeavyTailCovSpec>;
  explicit SamplingWorld(Params params);

  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] double declared_m() const { return declared_m_; }
  [[nodiscard]] const Vector& w0() const { return w0_; }
  [[nodiscard]] const Params& params() const { return params_; }

  /// E[X X^T], analytic.
  [[nodiscard]] Matrix covariance() const;
  /// Closed-form (risk, w*) of the best linear predictor when available.
  [[nodiscard]] std::optional<std::pair<double, Vector>> best_linear_closed_form() const;

  /// n i.i.d. draws; a pure function of (n, seed).
  [[nodiscard]] LabeledSample sample(Eigen::Index n, std::uint64_t seed) const;

 private:
  Params params_;
  Eigen::Index dim_;
  double declared_m_;
  Vector w0_;
};

using World = std::variant<FiniteWorld, SamplingWorld>;

[[nodiscard]] World build_world(const WorldSpec& spec);
[[nodiscard]] Eigen::Index world_dim(const World& w);
[[nodiscard]] double world_declared_m(const World& w);
[[nodiscard]] Matrix world_covariance(const World& w);

/// Atoms {((1), m): 1 - 1/n, ((sqrt n), 0): 1/n}.
[[nodiscard]] FiniteWorld build_bad_world(int n, double m);

/// Atoms {((0), 0): 1 - p0, ((x0), f(x0)): p0} with p = 1 - delta^{1/n} and
/// p0 = min(p, 1 / f(x0)^2). Requires delta in (e^{-n}, 1) and f(x0) != 0.
[[nodiscard]] FiniteWorld build_necessity_world(int n, double delta, double x0, const ScalarMap& f);

/// min(sup|f|^2 log(1/delta) / (4n), 1): the risk level every estimator
/// exceeds with probability at least delta on the necessity world.
[[nodiscard]] double necessity_risk_floor(int n, double delta, const ScalarMap& f);

/// R(g) = sum_s p_s (g(x_s) - y_s)^2.
[[nodiscard]] double exact_risk(const FiniteWorld& w, const Predictor& g);

struct BestLinear {
  double risk = 0.0;
  Vector w;
};

/// Risk and min-norm weights of the best linear predictor, w* = Sigma^+ E[YX].
[[nodiscard]] BestLinear best_linear_risk(const FiniteWorld& w);

/// Inverse-CDF draws over the atoms in construction order; pure in (n, seed).
[[nodiscard]] LabeledSample sample(const FiniteWorld& w, Eigen::Index n, std::uint64_t seed);
[[nodiscard]] LabeledSample sample(const SamplingWorld& w, Eigen::Index n, std::uint64_t seed);
[[nodiscard]] LabeledSample sample(const World& w, Eigen::Index n, std::uint64_t seed);

struct MonteCarloRisk {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Empirical squared error on a hold-out sample with its standard error.
[[nodiscard]] MonteCarloRisk monte_carlo_risk(const LabeledSample& holdout, const Predictor& g);

}  // namespace dfreg::worlds
