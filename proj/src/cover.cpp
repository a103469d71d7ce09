#include "dfreg/cover.hpp"

#include "dfreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dfreg::cover {

namespace {

Vector predictions(const Predictor& f, const RowMatrix& xs) {
  Vector out(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) out[i] = evaluate(f, xs.row(i).transpose());
  return out;
}

double mean_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().mean(); }

}  // namespace

double empirical_l1_dist(const Predictor& f, const Predictor& g, const RowMatrix& xs) {
  require(xs.rows() >= 1, "empirical_l1_dist: empty design");
  return mean_abs_diff(predictions(f, xs), predictions(g, xs));
}

double resolve_eps(const AggregatorConfig& cfg, Eigen::Index n, Eigen::Index d) {
  return cfg.eps.value_or(cfg.m * static_cast<double>(d) / static_cast<double>(n));
}

int default_net_cap(Eigen::Index n, Eigen::Index d) {
  const double ratio = std::max(static_cast<double>(n) / static_cast<double>(d), 2.0);
  return static_cast<int>(std::ceil(8.0 * static_cast<double>(d) * std::log(ratio) + 16.0));
}

std::vector<TruncatedLinear> build_candidate_pool(const LabeledSample& s1, const AggregatorConfig& cfg,
                                                  std::uint64_t seed) {
  cfg.validate();
  const Eigen::Index n = s1.size();
  const Eigen::Index d = s1.dim();
  const double eps = resolve_eps(cfg, n, d);
  const auto cap = static_cast<std::size_t>(cfg.pool_size);
  std::mt19937_64 rng(seed);

  std::vector<TruncatedLinear> pool;
  std::vector<Vector> kept_predictions;
  auto offer = [&](const Vector& w) {
    if (pool.size() >= cap) return;
    TruncatedLinear cand{w, cfg.m};
    Vector pred = predictions(cand, s1.xs());
    for (const auto& other : kept_predictions) {
      if (mean_abs_diff(pred, other) <= 0.25 * eps) return;
    }
    pool.push_back(std::move(cand));
    kept_predictions.push_back(std::move(pred));
  };

  offer(Vector::Zero(d));
  offer(linalg::min_norm_ls(s1));

  const int refits = (cfg.pool_size + 3) / 4;
  const Eigen::Index half = std::max<Eigen::Index>(1, n / 2);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (int r = 0; r < refits; ++r) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Eigen::Index> rows(order.begin(), order.begin() + half);
    std::sort(rows.begin(), rows.end());
    offer(linalg::min_norm_ls(s1.select(rows)));
  }

  // Scale grid: from eps / d up to the norm at which a typical covariate
  // already saturates the truncation (4 m d / q, q the 10% quantile of the
  // non-zero covariate norms).
  std::vector<double> norms;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = s1.xs().row(i).norm();
    if (v > 0.0) norms.push_back(v);
  }
  double q = 1.0;
  if (!norms.empty()) {
    const auto at = static_cast<std::ptrdiff_t>(norms.size() / 10);
    std::nth_element(norms.begin(), norms.begin() + at, norms.end());
    q = norms[static_cast<std::size_t>(at)];
  }
  const double lo = eps / static_cast<double>(d);
  const double hi = std::max(lo, 4.0 * cfg.m * static_cast<double>(d) / q);
  std::vector<double> scales(kScaleGridSize);
  for (int i = 0; i < kScaleGridSize; ++i) {
    scales[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (kScaleGridSize - 1));
  }

  for (const double scale : scales) {
    for (Eigen::Index j = 0; j < d; ++j) {
      for (const double sign : {1.0, -1.0}) {
        Vector w = Vector::Zero(d);
        w[j] = sign * scale;
        offer(w);
      }
    }
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 4 * cfg.pool_size && pool.size() < cap; ++attempt) {
    Vector u(d);
    for (Eigen::Index j = 0; j < d; ++j) u[j] = normal(rng);
    if (u.norm() == 0.0) continue;
    u.normalize();
    for (const double scale : scales) offer(scale * u);
  }
  return pool;
}

EmpiricalNet build_net(const std::vector<TruncatedLinear>& pool, double eps, int cap, const LabeledSample& s1) {
  require(!pool.empty(), "build_net: empty pool");
  require(eps > 0.0, "build_net: eps must be positive");
  require(cap >= 1, "build_net: cap must be >= 1");
  const std::size_t p = pool.size();
  std::vector<Vector> preds;
  preds.reserve(p);
  for (const auto& f : pool) preds.push_back(predictions(f, s1.xs()));

  std::size_t start = 0;
  double best_risk = (preds[0] - s1.ys()).squaredNorm();
  for (std::size_t i = 1; i < p; ++i) {
    const double r = (preds[i] - s1.ys()).squaredNorm();
    if (r < best_risk) {
      best_risk = r;
      start = i;
    }
  }

  EmpiricalNet net;
  net.eps = eps;
  net.anchor_sample = s1.xs();
  net.pool_size_used = static_cast<int>(p);
  std::vector<double> nearest(p);
  auto admit = [&](std::size_t idx) {
    net.members.push_back(pool[idx]);
    net.pool_indices.push_back(idx);
    for (std::size_t i = 0; i < p; ++i) {
      const double dist = mean_abs_diff(preds[i], preds[idx]);
      nearest[i] = net.members.size() == 1 ? dist : std::min(nearest[i], dist);
    }
  };
  admit(start);
  while (true) {
    const auto far = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
    if (nearest[far] <= eps) break;
    if (static_cast<int>(net.members.size()) >= cap) {
      net.truncated = true;
      break;
    }
    admit(far);
  }
  net.covering_radius = *std::max_element(nearest.begin(), nearest.end());
  return net;
}

Matrix net_distance_matrix(const EmpiricalNet& net) {
  const auto s = static_cast<Eigen::Index>(net.members.size());
  std::vector<Vector> preds;
  for (const auto& f : net.members) preds.push_back(predictions(f, net.anchor_sample));
  Matrix dist = Matrix::Zero(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = i + 1; j < s; ++j) {
      dist(i, j) = dist(j, i) = mean_abs_diff(preds[static_cast<std::size_t>(i)], preds[static_cast<std::size_t>(j)]);
    }
  }
  return dist;
}

}  // namespace dfreg::cover
