#include "dfreg/model.hpp"

#include "dfreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dfreg {

LabeledSample::LabeledSample(RowMatrix xs, Vector ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
  require(xs_.rows() >= 1 && xs_.cols() >= 1, "LabeledSample: need n >= 1 and d >= 1");
  require(xs_.rows() == ys_.size(), "LabeledSample: row count differs from response count");
  require(xs_.allFinite() && ys_.allFinite(), "LabeledSample: non-finite entry");
}

LabeledSample LabeledSample::slice(Eigen::Index first, Eigen::Index count) const {
  require(first >= 0 && count >= 1 && first + count <= size(), "LabeledSample::slice: range out of bounds");
  return {xs_.middleRows(first, count), ys_.segment(first, count)};
}

LabeledSample LabeledSample::without(Eigen::Index i) const {
  require(size() >= 2 && i >= 0 && i < size(), "LabeledSample::without: bad index");
  RowMatrix xs(size() - 1, dim());
  Vector ys(size() - 1);
  xs.topRows(i) = xs_.topRows(i);
  ys.head(i) = ys_.head(i);
  xs.bottomRows(size() - 1 - i) = xs_.bottomRows(size() - 1 - i);
  ys.tail(size() - 1 - i) = ys_.tail(size() - 1 - i);
  return {std::move(xs), std::move(ys)};
}

LabeledSample LabeledSample::select(const std::vector<Eigen::Index>& rows) const {
  require(!rows.empty(), "LabeledSample::select: empty selection");
  RowMatrix xs(static_cast<Eigen::Index>(rows.size()), dim());
  Vector ys(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] >= 0 && rows[r] < size(), "LabeledSample::select: index out of bounds");
    xs.row(static_cast<Eigen::Index>(r)) = xs_.row(rows[r]);
    ys[static_cast<Eigen::Index>(r)] = ys_[rows[r]];
  }
  return {std::move(xs), std::move(ys)};
}

// ---------------------------------------------------------------------------

ForsterWarmuth::ForsterWarmuth(Vector w_, Matrix gram_, std::optional<double> m_clip_)
    : w(std::move(w_)), gram(std::move(gram_)), m_clip(m_clip_) {
  require(gram.rows() == w.size() && gram.cols() == w.size(), "ForsterWarmuth: gram must be d x d");
  require(!m_clip || *m_clip > 0.0, "ForsterWarmuth: m_clip must be positive");
  auto eig = linalg::symmetric_eigen(gram);
  basis_ = std::move(eig.eigenvectors);
  spectrum_ = std::move(eig.eigenvalues);
  rank_tol_ = linalg::default_rtol(w.size());
}

double ForsterWarmuth::leverage(const VectorRef& x) const {
  // With G = V diag(l) V^T: if x leaves range(G) the leverage is exactly 1,
  // otherwise h = q / (1 + q) where q = <G^+ x, x>.
  const Vector z = basis_.transpose() * x;
  const double xx = z.squaredNorm();
  if (xx == 0.0) return 0.0;
  const double scale = std::max(std::max(spectrum_[0], 0.0), xx);
  double q = 0.0;
  double outside = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (spectrum_[i] > rank_tol_ * scale) {
      q += z[i] * z[i] / spectrum_[i];
    } else {
      outside += z[i] * z[i];
    }
  }
  if (outside > rank_tol_ * scale) return 1.0;
  return q / (1.0 + q);
}

PredictorPtr share(Predictor p) { return std::make_shared<const Predictor>(std::move(p)); }

Predictor make_midpoint(const Predictor& first, const Predictor& second) {
  return Midpoint{share(first), share(second)};
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dim(Eigen::Index expected, const VectorRef& x) {
  if (expected != 0 && expected != x.size()) {
    throw ContractViolation("evaluate: predictor expects dimension " + std::to_string(expected) + ", got " +
                            std::to_string(x.size()));
  }
}

double clamp_abs(double v, double m) { return std::max(-m, std::min(m, v)); }

}  // namespace

Eigen::Index input_dim(const Predictor& p) {
  return std::visit(overloaded{
                        [](const ZeroPredictor& z) { return z.dim; },
                        [](const LinearPredictor& l) { return l.w.size(); },
                        [](const TruncatedLinear& t) { return t.w.size(); },
                        [](const ForsterWarmuth& f) { return f.w.size(); },
                        [](const Midpoint& mp) {
                          const auto a = input_dim(*mp.first);
                          return a != 0 ? a : input_dim(*mp.second);
                        },
                        [](const Truncated& t) { return input_dim(*t.inner); },
                    },
                    p.value);
}

double sup_norm_bound(const Predictor& p) {
  static constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(overloaded{
                        [](const ZeroPredictor&) { return 0.0; },
                        [](const LinearPredictor& l) { return l.w.isZero(0.0) ? 0.0 : inf; },
                        [](const TruncatedLinear& t) { return t.m; },
                        [](const ForsterWarmuth& f) { return f.m_clip.value_or(inf); },
                        [](const Midpoint& mp) {
                          return std::max(sup_norm_bound(*mp.first), sup_norm_bound(*mp.second));
                        },
                        [](const Truncated& t) { return std::min(t.m, sup_norm_bound(*t.inner)); },
                    },
                    p.value);
}

double evaluate(const Predictor& p, const VectorRef& x) {
  return std::visit(overloaded{
                        [&](const ZeroPredictor& z) {
                          check_dim(z.dim, x);
                          return 0.0;
                        },
                        [&](const LinearPredictor& l) {
                          check_dim(l.w.size(), x);
                          return l.w.dot(x);
                        },
                        [&](const TruncatedLinear& t) {
                          check_dim(t.w.size(), x);
                          return clamp_abs(t.w.dot(x), t.m);
                        },
                        [&](const ForsterWarmuth& f) {
                          check_dim(f.w.size(), x);
                          const double shrink = 1.0 - f.leverage(x);
                          const double v = shrink * shrink * f.w.dot(x);
                          return f.m_clip ? clamp_abs(v, *f.m_clip) : v;
                        },
                        [&](const Midpoint& mp) { return 0.5 * (evaluate(*mp.first, x) + evaluate(*mp.second, x)); },
                        [&](const Truncated& t) { return clamp_abs(evaluate(*t.inner, x), t.m); },
                    },
                    p.value);
}

std::string variant_name(const Predictor& p) {
  return std::visit(overloaded{
                        [](const ZeroPredictor&) { return std::string("Zero"); },
                        [](const LinearPredictor&) { return std::string("Linear"); },
                        [](const TruncatedLinear&) { return std::string("TruncatedLinear"); },
                        [](const ForsterWarmuth&) { return std::string("ForsterWarmuth"); },
                        [](const Midpoint&) { return std::string("Midpoint"); },
                        [](const Truncated&) { return std::string("Truncated"); },
                    },
                    p.value);
}

// ---------------------------------------------------------------------------

FiniteWorld::FiniteWorld(std::vector<Atom> atoms, std::optional<double> declared_m) : atoms_(std::move(atoms)) {
  require(!atoms_.empty(), "FiniteWorld: need at least one atom");
  const auto d = atoms_.front().x.size();
  require(d >= 1, "FiniteWorld: atoms need dimension >= 1");
  double total = 0.0;
  for (const auto& a : atoms_) {
    require(a.x.size() == d, "FiniteWorld: atoms have mixed dimensions");
    require(a.p > 0.0 && std::isfinite(a.p), "FiniteWorld: atom probabilities must be positive");
    require(a.x.allFinite() && std::isfinite(a.y), "FiniteWorld: non-finite atom");
    total += a.p;
  }
  require(std::abs(total - 1.0) <= 1e-12, "FiniteWorld: probabilities must sum to 1");
  declared_m_ = declared_m.value_or(conditional_bound());
  require(declared_m_ > 0.0, "FiniteWorld: declared m must be positive");
}

double FiniteWorld::conditional_bound() const {
  // Group atoms sharing the same x.
  double worst = 0.0;
  std::vector<bool> seen(atoms_.size(), false);
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (seen[i]) continue;
    double mass = 0.0;
    double second = 0.0;
    for (std::size_t j = i; j < atoms_.size(); ++j) {
      if (!seen[j] && atoms_[j].x == atoms_[i].x) {
        seen[j] = true;
        mass += atoms_[j].p;
        second += atoms_[j].p * atoms_[j].y * atoms_[j].y;
      }
    }
    worst = std::max(worst, second / mass);
  }
  return std::sqrt(worst);
}

double FiniteWorld::second_moment_y() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.p * a.y * a.y;
  return s;
}

Matrix FiniteWorld::covariance() const {
  Matrix sigma = Matrix::Zero(dim(), dim());
  for (const auto& a : atoms_) sigma.noalias() += a.p * a.x * a.x.transpose();
  return sigma;
}

Vector FiniteWorld::cross_moment() const {
  Vector b = Vector::Zero(dim());
  for (const auto& a : atoms_) b += a.p * a.y * a.x;
  return b;
}

void AggregatorConfig::validate() const {
  require(m > 0.0 && std::isfinite(m), "AggregatorConfig: m must be positive");
  require(delta > 0.0 && delta < 1.0, "AggregatorConfig: delta must lie in (0, 1)");
  require(!eps || *eps > 0.0, "AggregatorConfig: eps must be positive");
  require(!k || *k >= 1, "AggregatorConfig: k must be >= 1");
  require(!alpha || *alpha > 0.0, "AggregatorConfig: alpha must be positive");
  require(!net_cap || *net_cap >= 2, "AggregatorConfig: net_cap must be >= 2");
  require(pool_size >= 8, "AggregatorConfig: pool_size must be >= 8");
}

}  // namespace dfreg
