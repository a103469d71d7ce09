#pragma once

// Dense linear algebra on Gram matrices: spectral decomposition,
// Moore-Penrose inverse, minimum-norm least squares, leverage scores and
// matrix square roots.

#include "dfreg/model.hpp"

#include <optional>
#include <stdexcept>

namespace dfreg::linalg {

class NotPsdError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A = V diag(eigenvalues) V^T with eigenvalues in descending order.
struct SymmetricEigen {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// Decomposes (A + A^T) / 2. Throws ContractViolation on non-square or
/// non-finite input.
[[nodiscard]] SymmetricEigen symmetric_eigen(const Matrix& a);

/// Relative rank tolerance used when none is given: d * machine epsilon.
[[nodiscard]] double default_rtol(Eigen::Index d);

/// Moore-Penrose inverse of a symmetric matrix. Eigenvalues at or below
/// rtol * lambda_max are treated as zero.
[[nodiscard]] Matrix pseudo_inverse(const Matrix& a, std::optional<double> rtol = std::nullopt);

/// sum_i X_i X_i^T.
[[nodiscard]] Matrix gram(const LabeledSample& s);

/// sum_i Y_i X_i.
[[nodiscard]] Vector moment(const LabeledSample& s);

/// Minimum-norm minimizer of sum_i (<w, X_i> - Y_i)^2.
[[nodiscard]] Vector min_norm_ls(const LabeledSample& s);

/// h_j = <(sum_i X_i X_i^T)^+ X_j, X_j> for every row j.
[[nodiscard]] Vector leverage_scores(const LabeledSample& s);

struct SqrtPair {
  Matrix sqrt;
  Matrix inv_sqrt;
};

/// Sigma^{1/2} and (Sigma^+)^{1/2}. Throws NotPsdError when an eigenvalue is
/// below -1e-8 * lambda_max.
[[nodiscard]] SqrtPair sqrt_and_invsqrt(const Matrix& sigma);

}  // namespace dfreg::linalg
