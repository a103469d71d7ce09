#include "dfreg/estimators.hpp"

#include "dfreg/linalg.hpp"

namespace dfreg::estimators {

KnownCovariance::KnownCovariance(Matrix sigma_) : sigma(std::move(sigma_)) {
  require(sigma.rows() == sigma.cols() && sigma.rows() >= 1, "KnownCovariance: sigma must be square");
  sigma_inv_sqrt = linalg::sqrt_and_invsqrt(sigma).inv_sqrt;
  sigma_inv = linalg::pseudo_inverse(sigma);
}

Predictor fit_erm(const LabeledSample& s) { return LinearPredictor{linalg::min_norm_ls(s)}; }

Predictor fit_truncated_ls(const LabeledSample& s, double m) {
  require(m > 0.0, "fit_truncated_ls: m must be positive");
  return TruncatedLinear{linalg::min_norm_ls(s), m};
}

Predictor fit_forster_warmuth(const LabeledSample& s, std::optional<double> m_clip) {
  return ForsterWarmuth(linalg::min_norm_ls(s), linalg::gram(s), m_clip);
}

Predictor fit_projection(const LabeledSample& s, const KnownCovariance& kc) {
  require(kc.sigma.rows() == s.dim(), "fit_projection: covariance dimension mismatch");
  const Vector mean_moment = linalg::moment(s) / static_cast<double>(s.size());
  return LinearPredictor{kc.sigma_inv * mean_moment};
}

Predictor fit_robust_projection(const LabeledSample& s, const KnownCovariance& kc, double delta,
                                mom::RobustMeanKind kind) {
  require(kc.sigma.rows() == s.dim(), "fit_robust_projection: covariance dimension mismatch");
  require(delta > 0.0 && delta < 1.0, "fit_robust_projection: delta must lie in (0, 1)");
  // Rows U_i = Y_i Sigma^{-1/2} X_i.
  const RowMatrix us = s.ys().asDiagonal() * (s.xs() * kc.sigma_inv_sqrt.transpose());
  const auto mu = mom::robust_mean(us, delta, kind);
  return LinearPredictor{kc.sigma_inv_sqrt * mu.mean};
}

}  // namespace dfreg::estimators
