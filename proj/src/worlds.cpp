#include "dfreg/worlds.hpp"

#include "dfreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dfreg::worlds {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double clamp_abs(double v, double m) { return std::max(-m, std::min(m, v)); }

Vector default_w0(int d) { return Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d))); }

}  // namespace

double ScalarMap::operator()(double x) const {
  if (table.empty()) return scale * x;
  for (const auto& [tx, fx] : table) {
    if (tx == x) return fx;
  }
  throw ContractViolation("ScalarMap: point not present in table");
}

double ScalarMap::sup_abs() const {
  if (table.empty()) return scale == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (const auto& entry : table) s = std::max(s, std::abs(entry.second));
  return s;
}

double NecessitySpec::point() const { return x0.value_or(std::sqrt(static_cast<double>(n))); }

// ---------------------------------------------------------------------------

FiniteWorld build_bad_world(int n, double m) {
  require(n >= 2, "build_bad_world: n must be >= 2");
  require(m > 0.0, "build_bad_world: m must be positive");
  const double q = 1.0 / n;
  std::vector<Atom> atoms;
  atoms.push_back({Vector::Constant(1, 1.0), m, 1.0 - q});
  atoms.push_back({Vector::Constant(1, std::sqrt(static_cast<double>(n))), 0.0, q});
  return FiniteWorld(std::move(atoms), m);
}

FiniteWorld build_necessity_world(int n, double delta, double x0, const ScalarMap& f) {
  require(n >= 1, "build_necessity_world: n must be >= 1");
  require(delta > std::exp(-static_cast<double>(n)) && delta < 1.0,
          "build_necessity_world: delta must lie in (e^{-n}, 1)");
  for (const auto& [tx, fx] : f.table) {
    require(tx != 0.0 || fx == 0.0, "build_necessity_world: f(0) must be 0");
  }
  const double fx0 = f(x0);
  require(fx0 != 0.0 && x0 != 0.0, "build_necessity_world: need x0 != 0 and f(x0) != 0");
  const double p = -std::expm1(std::log(delta) / n);
  const double p0 = std::min(p, 1.0 / (fx0 * fx0));
  std::vector<Atom> atoms;
  atoms.push_back({Vector::Zero(1), 0.0, 1.0 - p0});
  atoms.push_back({Vector::Constant(1, x0), fx0, p0});
  return FiniteWorld(std::move(atoms), std::abs(fx0));
}

double necessity_risk_floor(int n, double delta, const ScalarMap& f) {
  const double sup = f.sup_abs();
  if (std::isinf(sup)) return 1.0;
  return std::min(sup * sup * std::log(1.0 / delta) / (4.0 * n), 1.0);
}

double exact_risk(const FiniteWorld& w, const Predictor& g) {
  double r = 0.0;
  for (const auto& a : w.atoms()) {
    const double e = evaluate(g, a.x) - a.y;
    r += a.p * e * e;
  }
  return r;
}

BestLinear best_linear_risk(const FiniteWorld& w) {
  const Vector wstar = linalg::pseudo_inverse(w.covariance()) * w.cross_moment();
  return {exact_risk(w, LinearPredictor{wstar}), wstar};
}

LabeledSample sample(const FiniteWorld& w, Eigen::Index n, std::uint64_t seed) {
  require(n >= 1, "sample: n must be >= 1");
  const auto& atoms = w.atoms();
  std::vector<double> cdf(atoms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    acc += atoms[i].p;
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RowMatrix xs(n, w.dim());
  Vector ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = unif(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), atoms.size() - 1);
    xs.row(i) = atoms[idx].x.transpose();
    ys[i] = atoms[idx].y;
  }
  return {std::move(xs), std::move(ys)};
}

// ---------------------------------------------------------------------------

SamplingWorld::SamplingWorld(Params params) : params_(std::move(params)) {
  std::visit(overloaded{
                 [&](const GaussianLinearSpec& g) {
                   require(g.d >= 1, "GaussianLinear: d must be >= 1");
                   require(g.noise_std >= 0.0, "GaussianLinear: noise_std must be >= 0");
                   require(g.m_clip > 0.0, "GaussianLinear: m_clip must be positive");
                   dim_ = g.d;
                   w0_ = g.w0.value_or(default_w0(g.d));
                   declared_m_ = std::sqrt(g.m_clip * g.m_clip + g.noise_std * g.noise_std);
                 },
                 [&](const HeavyTailCovSpec& h) {
                   require(h.d >= 1, "HeavyTailCov: d must be >= 1");
                   require(h.tail_index > 2.0, "HeavyTailCov: tail_index must exceed 2 for a finite covariance");
                   require(h.m > 0.0, "HeavyTailCov: m must be positive");
                   dim_ = h.d;
                   w0_ = h.w0.value_or(default_w0(h.d));
                   declared_m_ = h.m;
                 },
             },
             params_);
  require(w0_.size() == dim_, "SamplingWorld: w0 has the wrong dimension");
}

Matrix SamplingWorld::covariance() const {
  return std::visit(overloaded{
                        [&](const GaussianLinearSpec&) -> Matrix { return Matrix::Identity(dim_, dim_); },
                        [&](const HeavyTailCovSpec& h) -> Matrix {
                          const double er2 = h.tail_index / (h.tail_index - 2.0);
                          return Matrix::Identity(dim_, dim_) * (er2 / static_cast<double>(dim_));
                        },
                    },
                    params_);
}

std::optional<std::pair<double, Vector>> SamplingWorld::best_linear_closed_form() const {
  const auto* g = std::get_if<GaussianLinearSpec>(&params_);
  if (g == nullptr) return std::nullopt;
  // <w0, X> = a Z with Z standard normal. By Stein's identity
  // E[clamp(aZ, c) X] = w0 P(|Z| <= c/a).
  const double a = w0_.norm();
  const double c = g->m_clip;
  const double noise = g->noise_std * g->noise_std;
  if (a == 0.0) return std::make_pair(noise, Vector(Vector::Zero(dim_)));
  const double t = c / a;
  const double inside = std::erf(t / std::numbers::sqrt2);
  const double phi = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
  const double ey2 = a * a * (inside - 2.0 * t * phi) + c * c * (1.0 - inside) + noise;
  const Vector wstar = w0_ * inside;
  return std::make_pair(ey2 - wstar.squaredNorm(), wstar);
}

LabeledSample SamplingWorld::sample(Eigen::Index n, std::uint64_t seed) const {
  require(n >= 1, "sample: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  RowMatrix xs(n, dim_);
  Vector ys(n);
  std::visit(overloaded{
                 [&](const GaussianLinearSpec& g) {
                   const double half_width = std::sqrt(3.0) * g.noise_std;
                   for (Eigen::Index i = 0; i < n; ++i) {
                     for (Eigen::Index j = 0; j < dim_; ++j) xs(i, j) = normal(rng);
                     const double signal = clamp_abs(xs.row(i).dot(w0_.transpose()), g.m_clip);
                     ys[i] = signal + half_width * unif(rng);
                   }
                 },
                 [&](const HeavyTailCovSpec& h) {
                   std::uniform_real_distribution<double> open01(std::numeric_limits<double>::min(), 1.0);
                   for (Eigen::Index i = 0; i < n; ++i) {
                     Vector u(dim_);
                     do {
                       for (Eigen::Index j = 0; j < dim_; ++j) u[j] = normal(rng);
                     } while (u.squaredNorm() == 0.0);
                     u.normalize();
                     const double radius = std::pow(open01(rng), -1.0 / h.tail_index);
                     xs.row(i) = (radius * u).transpose();
                     const double signal = clamp_abs(xs.row(i).dot(w0_.transpose()), 0.5 * h.m);
                     ys[i] = signal + 0.5 * h.m * unif(rng);
                   }
                 },
             },
             params_);
  return {std::move(xs), std::move(ys)};
}

LabeledSample sample(const SamplingWorld& w, Eigen::Index n, std::uint64_t seed) { return w.sample(n, seed); }

LabeledSample sample(const World& w, Eigen::Index n, std::uint64_t seed) {
  return std::visit([&](const auto& world) { return sample(world, n, seed); }, w);
}

// ---------------------------------------------------------------------------

World build_world(const WorldSpec& spec) {
  return std::visit(overloaded{
                        [](const BadTruncSpec& b) -> World { return build_bad_world(b.n, b.m); },
                        [](const NecessitySpec& s) -> World {
                          return build_necessity_world(s.n, s.delta, s.point(), s.map());
                        },
                        [](const GaussianLinearSpec& g) -> World { return SamplingWorld(g); },
                        [](const HeavyTailCovSpec& h) -> World { return SamplingWorld(h); },
                        [](const FiniteCustomSpec& f) -> World { return FiniteWorld(f.atoms, f.declared_m); },
                    },
                    spec);
}

Eigen::Index world_dim(const World& w) {
  return std::visit([](const auto& world) { return world.dim(); }, w);
}

double world_declared_m(const World& w) {
  return std::visit([](const auto& world) { return world.declared_m(); }, w);
}

Matrix world_covariance(const World& w) {
  return std::visit([](const auto& world) { return world.covariance(); }, w);
}

MonteCarloRisk monte_carlo_risk(const LabeledSample& holdout, const Predictor& g) {
  const Eigen::Index n = holdout.size();
  double mean = 0.0;
  double m2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = evaluate(g, holdout.x(i)) - holdout.y(i);
    const double loss = e * e;
    const double delta = loss - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (loss - mean);
  }
  const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace dfreg::worlds
