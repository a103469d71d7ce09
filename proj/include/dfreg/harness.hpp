#pragma once

// Seeded Monte Carlo replication of estimators against a world: replication r
// draws its sample with seed base_seed + r, fits every configured estimator
// and scores it with the world's exact risk (finite worlds) or a fixed
// hold-out sample (sampling worlds).

#include "dfreg/json_io.hpp"
#include "dfreg/model.hpp"
#include "dfreg/worlds.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dfreg::harness {

/// Registered estimator ids, in registry order:
/// erm, trunc_ls, fw, proj, robust_proj, aggregator, agg_finite.
[[nodiscard]] const std::vector<std::string>& estimator_ids();

struct EstimatorSpec {
  std::string id;
  json_io::Json options = json_io::Json::object();
};

enum class RiskMode { Auto, Exact, MonteCarlo };

struct ExperimentConfig {
  worlds::WorldSpec world = worlds::BadTruncSpec{};
  std::vector<EstimatorSpec> estimators;
  /// Sample size per split: baselines see n points, the aggregator 3n.
  int n = 1;
  int replications = 1;
  std::uint64_t base_seed = 0;
  double delta = 0.05;
  /// Bound handed to the estimators (truncation level, aggregator m).
  double m = 1.0;
  std::string output_path;
  int workers = 1;
  /// Auto: exact risk on finite worlds, hold-out Monte Carlo otherwise.
  RiskMode risk_mode = RiskMode::Auto;
  Eigen::Index holdout_size = 1'000'000;
  std::uint64_t holdout_seed = 0x5eed'0f'd15c'a7d5ULL;
  std::vector<double> quantiles{0.5, 0.9, 0.95, 0.98, 0.99};
  std::vector<double> thresholds{0.1};
  /// Record measured fit times in wall_ms. Off by default so identical
  /// configurations give byte-identical CSV output.
  bool record_wall_time = false;

  /// Throws ContractViolation on invalid fields or unknown estimator ids.
  void validate() const;
};

[[nodiscard]] ExperimentConfig config_from_json(const json_io::Json& j);
[[nodiscard]] json_io::Json config_to_json(const ExperimentConfig& cfg);

/// Fits estimator `spec` on the leading rows of `stream` (which must hold at
/// least required_sample_size rows). `seed` feeds randomized estimators.
[[nodiscard]] Predictor fit_estimator(const EstimatorSpec& spec, const ExperimentConfig& cfg, const worlds::World& world,
                                      const LabeledSample& stream, std::uint64_t seed);

/// Rows of the replication stream an estimator consumes for split size n.
[[nodiscard]] Eigen::Index required_sample_size(const EstimatorSpec& spec, int n);

/// One RiskReport per (replication, estimator), sorted by replication and
/// then by position in cfg.estimators, independent of worker scheduling.
/// Estimator failures become reports with `error` set and NaN risks.
[[nodiscard]] std::vector<RiskReport> run_experiment(const ExperimentConfig& cfg);

struct EstimatorSummary {
  std::string estimator_id;
  std::size_t count = 0;
  std::size_t errors = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// Requested quantile level -> empirical quantile (linear interpolation).
  std::map<double, double> quantiles;
  /// Fraction of replications with excess below -1e-12.
  double negative_frequency = 0.0;
  /// Threshold t -> fraction of replications with excess >= t.
  std::map<double, double> failure_frequency;
  /// excess * n / (m^2 (d log(max(n/d, 1)) + log(1/delta))) at the
  /// (1 - delta)-quantile of the excess risk.
  double c_hat = 0.0;
};

/// Per-estimator statistics of excess_risk over successful reports, in order
/// of first appearance. Requires a nonempty list.
[[nodiscard]] std::vector<EstimatorSummary> summarize(const std::vector<RiskReport>& reports,
                                                      const std::vector<double>& quantiles,
                                                      const std::vector<double>& thresholds = {});

/// Empirical quantile of unsorted data with linear interpolation between
/// order statistics (level in [0, 1]).
[[nodiscard]] double quantile(std::vector<double> values, double level);

[[nodiscard]] json_io::Json summary_to_json(const std::vector<EstimatorSummary>& summary);

/// Header estimator_id,replication,seed,n,d,m,delta,risk,best_linear_risk,excess_risk,wall_ms.
void write_csv(std::ostream& out, const std::vector<RiskReport>& reports);

}  // namespace dfreg::harness
