#pragma once

// Baseline estimators: least squares, its truncation, the leverage-corrected
// Forster-Warmuth predictor and the projection estimators that assume the
// covariance E[X X^T] is known.

#include "dfreg/model.hpp"
#include "dfreg/mom.hpp"

#include <optional>

namespace dfreg::estimators {

/// The true Gram matrix E[X X^T] with its derived inverse square root and
/// pseudo-inverse.
struct KnownCovariance {
  explicit KnownCovariance(Matrix sigma);

  Matrix sigma;
  Matrix sigma_inv_sqrt;
  Matrix sigma_inv;
};

[[nodiscard]] Predictor fit_erm(const LabeledSample& s);

[[nodiscard]] Predictor fit_truncated_ls(const LabeledSample& s, double m);

[[nodiscard]] Predictor fit_forster_warmuth(const LabeledSample& s, std::optional<double> m_clip = std::nullopt);

/// w = Sigma^+ (1/n) sum_i Y_i X_i.
[[nodiscard]] Predictor fit_projection(const LabeledSample& s, const KnownCovariance& kc);

/// w = Sigma^{-1/2} mu_delta(Y_1 Sigma^{-1/2} X_1, ..., Y_n Sigma^{-1/2} X_n)
/// with mu_delta a median-of-means mean estimator.
[[nodiscard]] Predictor fit_robust_projection(const LabeledSample& s, const KnownCovariance& kc, double delta,
                                              mom::RobustMeanKind kind = mom::RobustMeanKind::GeometricMoM);

}  // namespace dfreg::estimators
