#include "dfreg/mom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dfreg::mom {

BlockPartition partition(Eigen::Index n, int k) {
  require(n >= 1, "partition: n must be >= 1");
  require(k >= 1 && k <= n, "partition: need 1 <= k <= n");
  return {k, n / k};
}

double median_inplace(std::span<double> values) {
  require(!values.empty(), "median: empty input");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> block_means(std::span<const double> values, const BlockPartition& part) {
  require(static_cast<Eigen::Index>(values.size()) >= part.covered(), "mom: fewer values than the partition covers");
  std::vector<double> means(static_cast<std::size_t>(part.k));
  const double inv = 1.0 / static_cast<double>(part.block_size);
  for (int j = 0; j < part.k; ++j) {
    double s = 0.0;
    for (Eigen::Index i = part.begin(j); i < part.end(j); ++i) s += values[static_cast<std::size_t>(i)];
    means[static_cast<std::size_t>(j)] = s * inv;
  }
  return means;
}

std::vector<double> block_loss_means(std::span<const double> losses, const BlockPartition& part) {
  return block_means(losses, part);
}

double mom_scalar(std::span<const double> values, const BlockPartition& part) {
  auto means = block_means(values, part);
  return median_inplace(means);
}

std::vector<double> squared_losses(const LabeledSample& s, const Predictor& f) {
  std::vector<double> out(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double e = evaluate(f, s.x(i)) - s.y(i);
    out[static_cast<std::size_t>(i)] = e * e;
  }
  return out;
}

double mom_of_difference(std::span<const double> blocks_f, std::span<const double> blocks_g,
                         std::vector<double>& scratch) {
  require(blocks_f.size() == blocks_g.size() && !blocks_f.empty(), "mom: block count mismatch");
  scratch.resize(blocks_f.size());
  for (std::size_t j = 0; j < blocks_f.size(); ++j) scratch[j] = blocks_f[j] - blocks_g[j];
  return median_inplace(scratch);
}

double mom_loss_diff(const LabeledSample& s, const Predictor& f, const Predictor& g, const BlockPartition& part) {
  const auto bf = block_means(squared_losses(s, f), part);
  const auto bg = block_means(squared_losses(s, g), part);
  std::vector<double> scratch;
  return mom_of_difference(bf, bg, scratch);
}

// ---------------------------------------------------------------------------

GeometricMedianResult geometric_median(const RowMatrix& points, double rel_tol, int max_iter) {
  require(points.rows() >= 1, "geometric_median: no points");
  require(points.allFinite(), "geometric_median: non-finite point");
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  GeometricMedianResult out{points.colwise().mean().transpose(), 0, false};
  if (n == 1) {
    out.point = points.row(0).transpose();
    out.converged = true;
    return out;
  }
  Vector& y = out.point;
  // Step tolerance is relative to the spread of the points so the result is
  // translation-equivariant.
  const double spread = std::sqrt((points.rowwise() - y.transpose()).rowwise().squaredNorm().mean());
  if (spread == 0.0) {
    out.converged = true;
    return out;
  }
  // Weiszfeld creeps towards a median that sits on a data point, so a data
  // point close to the iterate is tested directly for optimality.
  const auto data_point_is_optimal = [&](Eigen::Index j) {
    Vector g = Vector::Zero(d);
    int multiplicity = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector diff = points.row(i) - points.row(j);
      const double dist = diff.norm();
      if (dist == 0.0) {
        ++multiplicity;
      } else {
        g += diff / dist;
      }
    }
    return g.norm() <= multiplicity;
  };
  Vector weighted(d);
  Vector pull(d);
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    weighted.setZero();
    pull.setZero();
    double inv_sum = 0.0;
    int coincident = 0;
    Eigen::Index nearest = 0;
    double nearest_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector diff = points.row(i).transpose() - y;
      const double dist = diff.norm();
      if (dist < nearest_dist) {
        nearest_dist = dist;
        nearest = i;
      }
      if (dist == 0.0) {
        ++coincident;
        continue;
      }
      weighted += points.row(i).transpose() / dist;
      pull += diff / dist;
      inv_sum += 1.0 / dist;
    }
    if (inv_sum == 0.0) {
      out.converged = true;
      break;
    }
    if (coincident == 0 && nearest_dist <= 1e-3 * spread && data_point_is_optimal(nearest)) {
      y = points.row(nearest).transpose();
      out.converged = true;
      break;
    }
    const Vector target = weighted / inv_sum;
    Vector next;
    if (coincident == 0) {
      next = target;
    } else {
      // Vardi-Zhang: y sits on a data point of multiplicity `coincident`.
      const double r = pull.norm();
      if (r <= coincident) {
        out.converged = true;
        break;
      }
      const double t = static_cast<double>(coincident) / r;
      next = (1.0 - t) * target + t * y;
    }
    const double step = (next - y).norm();
    y = std::move(next);
    if (step <= rel_tol * spread) {
      out.converged = true;
      break;
    }
  }
  return out;
}

int robust_mean_blocks(Eigen::Index n, double delta) {
  require(delta > 0.0 && delta < 1.0, "robust_mean: delta must lie in (0, 1)");
  const double raw = std::ceil(8.0 * std::log(1.0 / delta));
  return static_cast<int>(std::clamp<double>(raw, 1.0, static_cast<double>(n)));
}

RobustMeanResult robust_mean_with_blocks(const RowMatrix& us, int k, RobustMeanKind kind) {
  require(us.rows() >= 1 && us.cols() >= 1, "robust_mean: empty input");
  require(us.allFinite(), "robust_mean: non-finite input");
  const auto part = partition(us.rows(), k);
  RowMatrix means(k, us.cols());
  for (int j = 0; j < k; ++j) {
    means.row(j) = us.middleRows(part.begin(j), part.block_size).colwise().sum() /
                   static_cast<double>(part.block_size);
  }
  RobustMeanResult out;
  out.k = k;
  if (k == 1) {
    out.mean = means.row(0).transpose();
    return out;
  }
  if (kind == RobustMeanKind::CoordinateMoM) {
    out.mean.resize(us.cols());
    std::vector<double> column(static_cast<std::size_t>(k));
    for (Eigen::Index c = 0; c < us.cols(); ++c) {
      for (int j = 0; j < k; ++j) column[static_cast<std::size_t>(j)] = means(j, c);
      out.mean[c] = median_inplace(column);
    }
    return out;
  }
  auto gm = geometric_median(means);
  out.mean = std::move(gm.point);
  out.iterations = gm.iterations;
  out.converged = gm.converged;
  return out;
}

RobustMeanResult robust_mean(const RowMatrix& us, double delta, RobustMeanKind kind) {
  return robust_mean_with_blocks(us, robust_mean_blocks(us.rows(), delta), kind);
}

}  // namespace dfreg::mom
