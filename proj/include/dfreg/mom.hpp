#pragma once

// Median-of-means primitives: equal-size block partitions, the scalar
// median of block means, MOM of loss differences and robust multivariate
// means built on block means.

#include "dfreg/model.hpp"

#include <span>
#include <vector>

namespace dfreg::mom {

/// k contiguous blocks of floor(n / k) indices over the first
/// k * floor(n / k) positions; the trailing n mod k indices are dropped.
struct BlockPartition {
  int k = 1;
  Eigen::Index block_size = 1;

  [[nodiscard]] Eigen::Index covered() const { return k * block_size; }
  [[nodiscard]] Eigen::Index begin(int j) const { return j * block_size; }
  [[nodiscard]] Eigen::Index end(int j) const { return (j + 1) * block_size; }
};

/// Throws ContractViolation unless 1 <= k <= n.
[[nodiscard]] BlockPartition partition(Eigen::Index n, int k);

/// Median of the values; for an even count, the mean of the two middle
/// order statistics. Reorders `values`.
[[nodiscard]] double median_inplace(std::span<double> values);

/// Block means of `values` under `part`.
[[nodiscard]] std::vector<double> block_means(std::span<const double> values, const BlockPartition& part);

/// Median of the block means.
[[nodiscard]] double mom_scalar(std::span<const double> values, const BlockPartition& part);

/// Per-sample squared losses (f(X_i) - Y_i)^2.
[[nodiscard]] std::vector<double> squared_losses(const LabeledSample& s, const Predictor& f);

/// MOM of l_f - l_g over the sample. Block means are formed from per-block
/// loss sums of each predictor, so mom_loss_diff(f, f) is exactly 0 and
/// swapping f and g flips the sign exactly.
[[nodiscard]] double mom_loss_diff(const LabeledSample& s, const Predictor& f, const Predictor& g,
                                   const BlockPartition& part);

/// Per-block mean losses for one predictor (or any per-sample series).
[[nodiscard]] std::vector<double> block_loss_means(std::span<const double> losses, const BlockPartition& part);

/// MOM of the difference of two series given their per-block means.
/// `scratch` is resized to part.k.
[[nodiscard]] double mom_of_difference(std::span<const double> blocks_f, std::span<const double> blocks_g,
                                       std::vector<double>& scratch);

enum class RobustMeanKind { GeometricMoM, CoordinateMoM };

struct GeometricMedianResult {
  Vector point;
  int iterations = 0;
  bool converged = false;
};

/// Weiszfeld iteration for argmin_mu sum_j ||mu - b_j|| over the rows of
/// `points`, with the Vardi-Zhang step when an iterate hits a data point.
/// Stops once a step is below rel_tol times the RMS spread of the points.
[[nodiscard]] GeometricMedianResult geometric_median(const RowMatrix& points, double rel_tol = 1e-10,
                                                     int max_iter = 1000);

struct RobustMeanResult {
  Vector mean;
  int k = 1;
  int iterations = 0;
  bool converged = true;
};

/// Block count used for a failure budget delta: ceil(8 log(1/delta)),
/// clamped to [1, n].
[[nodiscard]] int robust_mean_blocks(Eigen::Index n, double delta);

/// Median-of-means estimate of the mean of the rows of `us`.
[[nodiscard]] RobustMeanResult robust_mean(const RowMatrix& us, double delta, RobustMeanKind kind);

/// Same with an explicit block count.
[[nodiscard]] RobustMeanResult robust_mean_with_blocks(const RowMatrix& us, int k, RobustMeanKind kind);

}  // namespace dfreg::mom
