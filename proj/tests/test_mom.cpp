#include "doctest.h"

#include "dfreg/mom.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace dfreg;

namespace {

RowMatrix rows(std::initializer_list<std::initializer_list<double>> r) {
  RowMatrix out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (const double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

LabeledSample random_sample(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix xs(n, 2);
  Vector ys(n);
  for (int i = 0; i < n; ++i) {
    xs.row(i) << normal(rng), normal(rng);
    ys[i] = normal(rng) + xs(i, 0);
  }
  return {xs, ys};
}

}  // namespace

TEST_CASE("partition examples") {
  const auto p = mom::partition(6, 3);
  CHECK(p.block_size == 2);
  CHECK(p.begin(0) == 0);
  CHECK(p.end(0) == 2);
  CHECK(p.begin(2) == 4);
  CHECK(p.end(2) == 6);
  const auto q = mom::partition(7, 3);
  CHECK(q.block_size == 2);
  CHECK(q.covered() == 6);
  const auto one = mom::partition(5, 1);
  CHECK(one.block_size == 5);
  CHECK_THROWS_AS((void)mom::partition(3, 4), ContractViolation);
  CHECK_THROWS_AS((void)mom::partition(3, 0), ContractViolation);
}

TEST_CASE("mom_scalar examples") {
  const std::vector<double> v{1, 1, 2, 2, 100, 100};
  CHECK(mom::mom_scalar(v, mom::partition(6, 3)) == 2.0);
  const std::vector<double> c(12, 3.5);
  for (int k : {1, 2, 3, 4, 5, 6, 12}) CHECK(mom::mom_scalar(c, mom::partition(12, k)) == 3.5);
  // Even k averages the two middle block means.
  const std::vector<double> e{1, 2, 3, 10};
  CHECK(mom::mom_scalar(e, mom::partition(4, 4)) == 2.5);
  std::vector<double> m{5, 1, 3};
  CHECK(mom::median_inplace(m) == 3.0);
}

TEST_CASE("mom_scalar matches the naive oracle") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int n = 10 + t;
    const int k = 1 + t % 9;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = normal(rng);
    CHECK(mom::mom_scalar(v, mom::partition(n, k)) == doctest::Approx(oracles::naive_mom(v, k)).epsilon(1e-14));
  }
}

TEST_CASE("property: mom_scalar permutation, shift and scale") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 10.0);
  for (int t = 0; t < 200; ++t) {
    const int k = 1 + t % 7;
    const int b = 1 + t % 5;
    const int n = k * b + t % 3;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = normal(rng);
    const auto part = mom::partition(n, k);
    const double base = mom::mom_scalar(v, part);

    auto permuted = v;
    for (int j = 0; j < k; ++j) {
      std::shuffle(permuted.begin() + j * part.block_size, permuted.begin() + (j + 1) * part.block_size, rng);
    }
    CHECK(mom::mom_scalar(permuted, part) == doctest::Approx(base).epsilon(1e-13));

    // Shifts and scales by powers of two keep every intermediate exact.
    const double c = std::ldexp(std::round(normal(rng) * 8.0), -3);
    auto shifted = v;
    for (auto& x : shifted) x += c;
    CHECK(mom::mom_scalar(shifted, part) == doctest::Approx(base + c).epsilon(1e-12));
    const double lambda = unif(rng);
    auto scaled = v;
    for (auto& x : scaled) x *= lambda;
    CHECK(mom::mom_scalar(scaled, part) == doctest::Approx(lambda * base).epsilon(1e-12));
  }
}

TEST_CASE("heavy tails: MOM beats the sample mean in most trials") {
  // mu + S (P - 1) with P ~ Pareto(1, 1.5) and S a random sign: mean mu, infinite
  // variance. A one-sided Pareto is not used because the median of skewed block
  // means sits well below the mean at this block size.
  const double shape = 1.5;
  const double mu = 3.0;
  const int n = 10000;
  const int k = 32;
  int wins = 0;
  for (int t = 0; t < 1000; ++t) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(t));
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> v(n);
    for (auto& x : v) x = mu + (coin(rng) ? 1.0 : -1.0) * (std::pow(unif(rng), -1.0 / shape) - 1.0);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    const double est = mom::mom_scalar(v, mom::partition(n, k));
    wins += std::abs(est - mu) < std::abs(mean - mu) ? 1 : 0;
  }
  MESSAGE("MOM closer in " << wins << " of 1000 trials");
  CHECK(wins >= 600);
}

TEST_CASE("mom_loss_diff examples and antisymmetry") {
  std::mt19937_64 rng(3);
  const auto s = random_sample(rng, 50);
  Vector w1(2), w2(2);
  w1 << 1.0, 0.0;
  w2 << 0.2, 0.5;
  const Predictor f = LinearPredictor{w1};
  const Predictor g = TruncatedLinear{w2, 0.8};
  for (int k = 1; k <= 10; ++k) {
    const auto part = mom::partition(50, k);
    CHECK(mom::mom_loss_diff(s, f, f, part) == 0.0);
    CHECK(mom::mom_loss_diff(s, f, g, part) == -mom::mom_loss_diff(s, g, f, part));
  }
  const auto lf = mom::squared_losses(s, f);
  const auto lg = mom::squared_losses(s, g);
  double mean = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) mean += lf[i] - lg[i];
  mean /= 50.0;
  CHECK(mom::mom_loss_diff(s, f, g, mom::partition(50, 1)) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("robust_mean examples") {
  RowMatrix same(20, 3);
  for (int i = 0; i < 20; ++i) same.row(i) << 1.0, -2.0, 0.5;
  for (const auto kind : {mom::RobustMeanKind::GeometricMoM, mom::RobustMeanKind::CoordinateMoM}) {
    const auto r = mom::robust_mean(same, 0.05, kind);
    CHECK((r.mean - same.row(0).transpose()).norm() <= 1e-12);
  }

  // Equilateral triangle centred at c.
  const double h = std::sqrt(3.0) / 2.0;
  const RowMatrix tri = rows({{3.0 + 1.0, 1.0}, {3.0 - 0.5, 1.0 + h}, {3.0 - 0.5, 1.0 - h}});
  const auto gm = mom::geometric_median(tri);
  CHECK(std::abs(gm.point[0] - 3.0) <= 1e-8);
  CHECK(std::abs(gm.point[1] - 1.0) <= 1e-8);

  CHECK(mom::robust_mean_blocks(1000, 0.01) == static_cast<int>(std::ceil(8.0 * std::log(100.0))));
  CHECK(mom::robust_mean_blocks(10, 0.01) == 10);
  CHECK(mom::robust_mean_blocks(10, 0.9) == 1);
}

TEST_CASE("property: robust_mean translation equivariance and k = 1") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    RowMatrix us(80, 3);
    for (int i = 0; i < 80; ++i) us.row(i) << normal(rng), std::pow(normal(rng), 3), normal(rng) * 5.0;
    Vector c(3);
    c << normal(rng) * 10.0, normal(rng), normal(rng);
    const RowMatrix moved = us.rowwise() + c.transpose();
    for (const auto kind : {mom::RobustMeanKind::GeometricMoM, mom::RobustMeanKind::CoordinateMoM}) {
      const auto a = mom::robust_mean(us, 0.05, kind).mean;
      const auto b = mom::robust_mean(moved, 0.05, kind).mean;
      CHECK((b - a - c).norm() <= 1e-9 * std::max(1.0, c.norm()));
      const Vector mean = us.colwise().mean().transpose();
      CHECK((mom::robust_mean_with_blocks(us, 1, kind).mean - mean).norm() == 0.0);
    }
  }
}

TEST_CASE("property: Weiszfeld output is stationary") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int k = 3 + t % 40;
    const int d = 1 + t % 6;
    RowMatrix pts(k, d);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) pts(i, j) = normal(rng) * (1.0 + 10.0 * (j % 2));
    }
    if (t % 10 == 0) pts.row(1) = pts.row(0);  // repeated point
    const auto gm = mom::geometric_median(pts);
    const double scale = std::sqrt((pts.rowwise() - pts.colwise().mean()).squaredNorm() / k);
    CHECK(gm.converged);
    CHECK(oracles::weiszfeld_subgradient_norm(pts, gm.point) <= 1e-6 * std::max(1.0, scale) * k);
  }

  // A data point that is the median: the Vardi-Zhang step must settle on it.
  const RowMatrix star = rows({{0, 0}, {0, 0}, {0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}});
  const auto gm = mom::geometric_median(star);
  CHECK(gm.point.norm() <= 1e-9);
}

TEST_CASE("heavy tails: geometric MOM deviation constant") {
  // Rows R U with R ~ Pareto(1, 3) and U uniform on the sphere: mean 0,
  // covariance E[R^2] / d * I = 3 / d * I.
  const int d = 4;
  const int n = 4000;
  const double delta = 0.01;
  const double var = 3.0 / d;
  const double tr = d * var;
  const double op = var;
  std::vector<double> errs;
  for (int t = 0; t < 1000; ++t) {
    std::mt19937_64 rng(50000 + static_cast<std::uint64_t>(t));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
    RowMatrix us(n, d);
    for (int i = 0; i < n; ++i) {
      Vector u(d);
      for (int j = 0; j < d; ++j) u[j] = normal(rng);
      u.normalize();
      us.row(i) = std::pow(unif(rng), -1.0 / 3.0) * u.transpose();
    }
    errs.push_back(mom::robust_mean(us, delta, mom::RobustMeanKind::GeometricMoM).mean.squaredNorm());
  }
  std::sort(errs.begin(), errs.end());
  const double q = errs[static_cast<std::size_t>(0.99 * (errs.size() - 1))];
  const double c = q * n / (tr + op * std::log(1.0 / delta));
  MESSAGE("fitted constant C = " << c);
  CHECK(c <= 20.0);
}
