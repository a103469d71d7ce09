#pragma once

// Empirical L1 nets over truncated linear predictors. The net covers a finite
// candidate pool (least-squares refits plus a direction/scale grid) built
// from the first third of the sample.

#include "dfreg/model.hpp"

#include <cstdint>
#include <vector>

namespace dfreg::cover {

/// (1/n) sum_i |f(X_i) - g(X_i)| over the rows of xs.
[[nodiscard]] double empirical_l1_dist(const Predictor& f, const Predictor& g, const RowMatrix& xs);

/// Net radius: cfg.eps when set, otherwise m * d / n.
[[nodiscard]] double resolve_eps(const AggregatorConfig& cfg, Eigen::Index n, Eigen::Index d);

/// ceil(8 d log(max(n / d, 2)) + 16).
[[nodiscard]] int default_net_cap(Eigen::Index n, Eigen::Index d);

/// Number of scales in the geometric grid used by the candidate pool.
inline constexpr int kScaleGridSize = 8;

/// Deterministic candidate pool over {clamp(<w, .>, +-m)}: zero, least
/// squares on s1 and on ceil(pool_size / 4) random halves of s1, signed axes
/// and random directions on a geometric scale grid. Candidates closer than
/// eps / 4 in empirical L1 to an earlier one are dropped; at most
/// cfg.pool_size survive.
[[nodiscard]] std::vector<TruncatedLinear> build_candidate_pool(const LabeledSample& s1, const AggregatorConfig& cfg,
                                                                std::uint64_t seed);

struct EmpiricalNet {
  std::vector<TruncatedLinear> members;
  /// Positions of the members in the pool.
  std::vector<std::size_t> pool_indices;
  double eps = 0.0;
  RowMatrix anchor_sample;
  int pool_size_used = 0;
  /// max over the pool of the distance to the nearest member.
  double covering_radius = 0.0;
  /// The cap stopped the traversal before the pool was covered at eps.
  bool truncated = false;
};

/// Greedy farthest-first traversal of the pool in empirical L1 over s1's
/// covariates, started at the pool element of smallest empirical risk on s1.
/// Adds the farthest remaining element while its distance exceeds eps and
/// fewer than `cap` members are selected.
[[nodiscard]] EmpiricalNet build_net(const std::vector<TruncatedLinear>& pool, double eps, int cap,
                                     const LabeledSample& s1);

/// Pairwise empirical L1 distances between net members.
[[nodiscard]] Matrix net_distance_matrix(const EmpiricalNet& net);

}  // namespace dfreg::cover
