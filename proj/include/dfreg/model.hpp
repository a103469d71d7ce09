#pragma once

// Domain types shared across the library: samples, predictors, finite worlds,
// aggregator configuration and per-replication reports.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dfreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<const Vector>;

/// Raised when a caller breaks a documented precondition (bad dimensions,
/// non-finite entries, parameters out of range).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws ContractViolation with `what` unless `ok`.
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

/// n labelled observations (X_i, Y_i) with X_i in R^d stored as rows.
class LabeledSample {
 public:
  LabeledSample(RowMatrix xs, Vector ys);

  [[nodiscard]] Eigen::Index size() const { return xs_.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return xs_.cols(); }
  [[nodiscard]] const RowMatrix& xs() const { return xs_; }
  [[nodiscard]] const Vector& ys() const { return ys_; }
  [[nodiscard]] auto x(Eigen::Index i) const { return xs_.row(i).transpose(); }
  [[nodiscard]] double y(Eigen::Index i) const { return ys_[i]; }

  /// Rows [first, first + count) as a new sample.
  [[nodiscard]] LabeledSample slice(Eigen::Index first, Eigen::Index count) const;
  /// The sample with row `i` removed. Requires size() >= 2.
  [[nodiscard]] LabeledSample without(Eigen::Index i) const;
  /// Rows selected by index, in the given order.
  [[nodiscard]] LabeledSample select(const std::vector<Eigen::Index>& rows) const;

 private:
  RowMatrix xs_;
  Vector ys_;
};

// ---------------------------------------------------------------------------
// Predictors

struct Predictor;
using PredictorPtr = std::shared_ptr<const Predictor>;

struct ZeroPredictor {
  Eigen::Index dim = 1;
};

struct LinearPredictor {
  Vector w;
};

/// x -> clamp(<w, x>, -m, m).
struct TruncatedLinear {
  Vector w;
  double m = 1.0;
};

/// Leverage-corrected least squares: x -> (1 - h(x))^2 <w, x>, where
/// h(x) = <(gram + x x^T)^+ x, x> and gram = sum_i X_i X_i^T of the
/// training sample.
struct ForsterWarmuth {
  ForsterWarmuth(Vector w, Matrix gram, std::optional<double> m_clip = std::nullopt);

  Vector w;
  Matrix gram;
  std::optional<double> m_clip;

  /// Leverage score of a query point against the stored design.
  [[nodiscard]] double leverage(const VectorRef& x) const;

 private:
  // Spectral factors of gram, derived from it at construction.
  Matrix basis_;
  Vector spectrum_;
  double rank_tol_ = 0.0;
};

/// Clamp of an arbitrary predictor to [-m, m]. Used to bound dictionary
/// elements that are not linear.
struct Truncated {
  PredictorPtr inner;
  double m = 1.0;
};

/// x -> (first(x) + second(x)) / 2.
struct Midpoint {
  PredictorPtr first;
  PredictorPtr second;
};

struct Predictor {
  using Variant =
      std::variant<ZeroPredictor, LinearPredictor, TruncatedLinear, ForsterWarmuth, Midpoint, Truncated>;
  Variant value;

  template <typename T>
  Predictor(T v) : value(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  template <typename T>
  [[nodiscard]] bool is() const {
    return std::holds_alternative<T>(value);
  }
  template <typename T>
  [[nodiscard]] const T& as() const {
    return std::get<T>(value);
  }
};

[[nodiscard]] PredictorPtr share(Predictor p);
[[nodiscard]] Predictor make_midpoint(const Predictor& first, const Predictor& second);

/// Input dimension the predictor accepts; 0 when it accepts any dimension.
[[nodiscard]] Eigen::Index input_dim(const Predictor& p);

/// Bound on |p(x)| over all x, or +inf.
[[nodiscard]] double sup_norm_bound(const Predictor& p);

/// Evaluates the predictor at x. Throws ContractViolation on dimension mismatch.
[[nodiscard]] double evaluate(const Predictor& p, const VectorRef& x);

/// Stable variant name ("Zero", "Linear", ...).
[[nodiscard]] std::string variant_name(const Predictor& p);

// ---------------------------------------------------------------------------
// Finite-support worlds

struct Atom {
  Vector x;
  double y = 0.0;
  double p = 0.0;
};

/// Finite-support joint law of (X, Y). Atoms keep construction order; that
/// order drives inverse-CDF sampling.
class FiniteWorld {
 public:
  explicit FiniteWorld(std::vector<Atom> atoms, std::optional<double> declared_m = std::nullopt);

  [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }
  [[nodiscard]] Eigen::Index dim() const { return atoms_.front().x.size(); }
  /// Declared bound m on sup_x E[Y^2 | X = x]^{1/2}; computed from the atoms
  /// when not declared.
  [[nodiscard]] double declared_m() const { return declared_m_; }
  /// Exact sup_x sqrt(E[Y^2 | X = x]) over the support.
  [[nodiscard]] double conditional_bound() const;
  [[nodiscard]] double second_moment_y() const;
  /// E[X X^T].
  [[nodiscard]] Matrix covariance() const;
  /// E[Y X].
  [[nodiscard]] Vector cross_moment() const;

 private:
  std::vector<Atom> atoms_;
  double declared_m_;
};

// ---------------------------------------------------------------------------
// Configuration and reports

/// Tuning of the median-of-means aggregator. Unset optional fields fall back
/// to the defaults derived from n, d, m and delta.
struct AggregatorConfig {
  double m = 1.0;
  double delta = 0.05;
  std::optional<double> eps;
  std::optional<int> k;
  std::optional<double> alpha;
  std::optional<int> net_cap;
  int pool_size = 64;

  void validate() const;
};

struct RiskReport {
  std::string estimator_id;
  std::int64_t replication = 0;
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  std::int64_t d = 0;
  double m = 0.0;
  double delta = 0.0;
  double excess_risk = 0.0;
  double risk = 0.0;
  double best_linear_risk = 0.0;
  double wall_ms = 0.0;
  /// Monte Carlo standard error of `risk` when it was estimated on a hold-out
  /// sample; zero for exact oracles.
  double risk_se = 0.0;
  std::optional<std::string> error;
};

}  // namespace dfreg
