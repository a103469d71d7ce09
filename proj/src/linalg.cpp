#include "dfreg/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace dfreg::linalg {

SymmetricEigen symmetric_eigen(const Matrix& a) {
  require(a.rows() == a.cols() && a.rows() > 0, "symmetric_eigen: matrix must be square and non-empty");
  require(a.allFinite(), "symmetric_eigen: non-finite entry");
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigen: solver failed");
  // Eigen returns ascending order.
  const Eigen::Index d = a.rows();
  SymmetricEigen out{Vector(d), Matrix(d, d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    out.eigenvalues[i] = solver.eigenvalues()[d - 1 - i];
    out.eigenvectors.col(i) = solver.eigenvectors().col(d - 1 - i);
  }
  return out;
}

double default_rtol(Eigen::Index d) {
  return static_cast<double>(d) * std::numeric_limits<double>::epsilon();
}

Matrix pseudo_inverse(const Matrix& a, std::optional<double> rtol) {
  require(!rtol || *rtol >= 0.0, "pseudo_inverse: rtol must be non-negative");
  const auto eig = symmetric_eigen(a);
  const double lmax = std::max(eig.eigenvalues.cwiseAbs().maxCoeff(), 0.0);
  const double cut = rtol.value_or(default_rtol(a.rows())) * lmax;
  Vector inv = Vector::Zero(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double l = eig.eigenvalues[i];
    if (std::abs(l) > cut && l != 0.0) inv[i] = 1.0 / l;
  }
  return eig.eigenvectors * inv.asDiagonal() * eig.eigenvectors.transpose();
}

Matrix gram(const LabeledSample& s) {
  Matrix g = Matrix::Zero(s.dim(), s.dim());
  g.selfadjointView<Eigen::Lower>().rankUpdate(s.xs().transpose());
  return g.selfadjointView<Eigen::Lower>();
}

Vector moment(const LabeledSample& s) { return s.xs().transpose() * s.ys(); }

Vector min_norm_ls(const LabeledSample& s) {
  // Solving in the eigenbasis keeps the result inside range(G), which is the
  // minimum-norm solution.
  const auto eig = symmetric_eigen(gram(s));
  const double cut = default_rtol(s.dim()) * std::max(eig.eigenvalues[0], 0.0);
  const Vector rhs = eig.eigenvectors.transpose() * moment(s);
  Vector coef = Vector::Zero(s.dim());
  for (Eigen::Index i = 0; i < s.dim(); ++i) {
    if (eig.eigenvalues[i] > cut) coef[i] = rhs[i] / eig.eigenvalues[i];
  }
  return eig.eigenvectors * coef;
}

Vector leverage_scores(const LabeledSample& s) {
  const Matrix pinv = pseudo_inverse(gram(s));
  Vector h(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const Vector xj = s.x(j);
    h[j] = xj.dot(pinv * xj);
  }
  return h;
}

SqrtPair sqrt_and_invsqrt(const Matrix& sigma) {
  const auto eig = symmetric_eigen(sigma);
  const Eigen::Index d = sigma.rows();
  const double lmax = std::max(eig.eigenvalues[0], 0.0);
  if (eig.eigenvalues[d - 1] < -1e-8 * lmax) {
    throw NotPsdError("sqrt_and_invsqrt: matrix is not positive semi-definite");
  }
  const double cut = default_rtol(d) * lmax;
  Vector root(d), inv_root(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double l = eig.eigenvalues[i];
    root[i] = l > 0.0 ? std::sqrt(l) : 0.0;
    inv_root[i] = l > cut ? 1.0 / std::sqrt(l) : 0.0;
  }
  const Matrix& v = eig.eigenvectors;
  return {v * root.asDiagonal() * v.transpose(), v * inv_root.asDiagonal() * v.transpose()};
}

}  // namespace dfreg::linalg
