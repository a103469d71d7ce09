#pragma once

// Deviation-optimal aggregation over truncated linear predictors: split the
// sample in three, cover the truncated class with an empirical L1 net on the
// first part, keep the net elements that survive a median-of-means
// tournament on the second part, and select among all pairwise midpoints of
// the survivors by min-max median-of-means on the third part.

#include "dfreg/cover.hpp"
#include "dfreg/model.hpp"
#include "dfreg/mom.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace dfreg::aggregator {

/// Predictions of a finite list of predictors on one sample.
class PredictionCache {
 public:
  PredictionCache(const std::vector<Predictor>& predictors, const LabeledSample& s);

  /// Rows are (first + second) / 2 of the given rows of `base`, matching
  /// evaluate(Midpoint) exactly.
  [[nodiscard]] static PredictionCache midpoints_of(const PredictionCache& base,
                                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(predictions_.rows()); }
  [[nodiscard]] Eigen::Index sample_size() const { return predictions_.cols(); }
  [[nodiscard]] const RowMatrix& predictions() const { return predictions_; }
  [[nodiscard]] const Vector& ys() const { return ys_; }

  /// Squared losses of predictor g on every sample point.
  [[nodiscard]] std::vector<double> losses(std::size_t g) const;
  /// Per-block mean losses, one row per predictor.
  [[nodiscard]] RowMatrix block_loss_means(const mom::BlockPartition& part) const;
  /// (1/n) sum_i (f(X_i) - g(X_i))^2.
  [[nodiscard]] double mean_sq_gap(std::size_t f, std::size_t g) const;

 private:
  PredictionCache(RowMatrix predictions, Vector ys) : predictions_(std::move(predictions)), ys_(std::move(ys)) {}

  RowMatrix predictions_;
  Vector ys_;
};

/// Block count ceil(8 log(2 |G|^2 / delta)) for a finite class of size |G|.
[[nodiscard]] int class_blocks(double class_size, double delta);

/// 32 sqrt(m^2 (log(2 |G|) + log(4 / delta)) / n).
[[nodiscard]] double class_alpha(double class_size, double delta, Eigen::Index n, double m);

struct Constants {
  int k = 1;
  double alpha = 0.0;
};

/// k = ceil(8 log(2 N^2 * 3 / delta)) and alpha = class_alpha(N^2, delta / 3)
/// for a net of N elements; the squared size covers the midpoint set.
[[nodiscard]] Constants default_constants(std::size_t net_size, Eigen::Index n, Eigen::Index d, double m,
                                          double delta);

/// Largest net size N whose default block count fits in n samples; 0 when
/// even a single element does not fit. Clamped to about 10^6.
[[nodiscard]] int feasible_net_size(Eigen::Index n, double delta);

struct FilterResult {
  std::vector<std::size_t> survivors;
  double alpha_used = 0.0;
  int k_used = 1;
  /// Per element f: max over g of MOM(l_f - l_g) minus the admission threshold.
  std::vector<double> max_margin;
  /// No element passed and the least-violating one was kept.
  bool fallback = false;
};

/// Keeps f when MOM(l_f - l_g) <= sqrt(2) alpha sqrt(mean (f - g)^2) + alpha^2
/// for every g. Requires k <= sample size.
[[nodiscard]] FilterResult filter(const PredictionCache& cache, int k, double alpha);
[[nodiscard]] FilterResult filter(const std::vector<Predictor>& net, const LabeledSample& s2, int k, double alpha);

/// Unordered pairs (i, j) with i <= j in canonical row order.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> midpoint_pairs(std::size_t count);

/// Midpoint(f, g) for every pair from midpoint_pairs(survivors.size()).
[[nodiscard]] std::vector<Predictor> midpoints(const std::vector<Predictor>& survivors);

/// M(g, f) = MOM(l_g - l_f) over all candidate pairs.
[[nodiscard]] Matrix mom_matrix(const PredictionCache& cache, int k);

struct Selection {
  std::size_t index = 0;
  /// max over f of MOM(l_selected - l_f).
  double value = 0.0;
};

/// argmin over g of max over f of MOM(l_g - l_f); ties go to the smallest
/// index. Rows are abandoned once their running max can no longer win, so
/// the result equals the argmin of the row maxima of mom_matrix.
[[nodiscard]] Selection minmax_select(const PredictionCache& cache, int k);
[[nodiscard]] Predictor minmax_select(const std::vector<Predictor>& candidates, const LabeledSample& s3, int k);

struct Diagnostics {
  Eigen::Index split_size = 0;
  double eps = 0.0;
  int pool_size = 0;
  int net_cap = 0;
  int net_size = 0;
  bool net_truncated = false;
  int k = 0;
  double alpha = 0.0;
  std::size_t survivors = 0;
  std::size_t candidates = 0;
  bool filter_fallback = false;
  /// Returned the zero predictor because the block count exceeded the split size.
  bool zero_fallback = false;
};

struct Fit {
  Predictor predictor;
  Diagnostics diagnostics;
};

/// The full three-split procedure on a sample of size 3n (trailing
/// |s| mod 3 rows unused). Deterministic in (s, cfg, seed).
[[nodiscard]] Fit fit_aggregator(const LabeledSample& s, const AggregatorConfig& cfg, std::uint64_t seed);

/// Finite-dictionary variant: every element is truncated at m, the sample is
/// halved, and the tournament plus min-max selection run directly on the
/// dictionary with k and alpha sized for |dict|^2 functions.
[[nodiscard]] Fit fit_finite_dictionary(const LabeledSample& s, const std::vector<Predictor>& dict, double m,
                                        double delta);

}  // namespace dfreg::aggregator
