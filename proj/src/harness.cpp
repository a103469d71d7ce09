#include "dfreg/harness.hpp"

#include "dfreg/aggregator.hpp"
#include "dfreg/estimators.hpp"
#include "dfreg/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

namespace dfreg::harness {

using json_io::Json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Rounding in risk - best_linear_risk leaves proper estimators at about -1e-16.
constexpr double kNegativeTolerance = 1e-12;

// splitmix64 finalizer: decorrelates estimator seeds from sampling seeds.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double option_number(const Json& options, const char* key, double fallback) {
  if (!options.contains(key) || options[key].is_null()) return fallback;
  require(options[key].is_number(), std::string("estimator option '") + key + "' must be a number");
  return options[key].get<double>();
}

void check_options(const EstimatorSpec& spec, std::initializer_list<const char*> allowed) {
  require(spec.options.is_object(), "options for '" + spec.id + "' must be a JSON object");
  for (const auto& [key, value] : spec.options.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    require(known, "unknown option '" + key + "' for estimator '" + spec.id + "'");
  }
}

void check_spec(const EstimatorSpec& spec) {
  const auto& ids = estimator_ids();
  require(std::find(ids.begin(), ids.end(), spec.id) != ids.end(), "unknown estimator id '" + spec.id + "'");
  if (spec.id == "erm" || spec.id == "proj") check_options(spec, {});
  if (spec.id == "trunc_ls") check_options(spec, {"m"});
  if (spec.id == "fw") check_options(spec, {"m_clip"});
  if (spec.id == "robust_proj") check_options(spec, {"delta", "kind"});
  if (spec.id == "aggregator") check_options(spec, {"m", "delta", "eps", "k", "alpha", "net_cap", "pool_size"});
  if (spec.id == "agg_finite") check_options(spec, {"m", "delta", "dictionary"});
}

mom::RobustMeanKind robust_kind(const Json& options) {
  if (!options.contains("kind")) return mom::RobustMeanKind::GeometricMoM;
  const auto& v = options["kind"];
  require(v.is_string(), "robust_proj option 'kind' must be a string");
  if (v == "geometric") return mom::RobustMeanKind::GeometricMoM;
  if (v == "coordinate") return mom::RobustMeanKind::CoordinateMoM;
  throw ContractViolation("robust_proj option 'kind' must be 'geometric' or 'coordinate'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

struct Scorer {
  const worlds::World* world = nullptr;
  bool exact = true;
  std::optional<LabeledSample> holdout;
  double best_linear = 0.0;

  [[nodiscard]] std::pair<double, double> risk(const Predictor& g) const {
    if (exact) return {worlds::exact_risk(std::get<FiniteWorld>(*world), g), 0.0};
    const auto mc = worlds::monte_carlo_risk(*holdout, g);
    return {mc.mean, mc.standard_error};
  }
};

Scorer make_scorer(const ExperimentConfig& cfg, const worlds::World& world) {
  Scorer s;
  s.world = &world;
  const auto* finite = std::get_if<FiniteWorld>(&world);
  s.exact = finite != nullptr && cfg.risk_mode != RiskMode::MonteCarlo;
  require(finite != nullptr || cfg.risk_mode != RiskMode::Exact, "risk_mode 'exact' needs a finite world");
  if (!s.exact) s.holdout = worlds::sample(world, cfg.holdout_size, cfg.holdout_seed);
  if (finite != nullptr) {
    s.best_linear = worlds::best_linear_risk(*finite).risk;
  } else {
    const auto& sampling = std::get<worlds::SamplingWorld>(world);
    if (auto closed = sampling.best_linear_closed_form()) {
      s.best_linear = closed->first;
    } else {
      s.best_linear = worlds::monte_carlo_risk(*s.holdout, LinearPredictor{linalg::min_norm_ls(*s.holdout)}).mean;
    }
  }
  return s;
}

std::vector<RiskReport> run_replication(const ExperimentConfig& cfg, const worlds::World& world, const Scorer& scorer,
                                        Eigen::Index stream_size, int r) {
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
  const auto stream = worlds::sample(world, stream_size, seed);
  std::vector<RiskReport> out;
  for (const auto& spec : cfg.estimators) {
    RiskReport rep;
    rep.estimator_id = spec.id;
    rep.replication = r;
    rep.seed = seed;
    rep.n = cfg.n;
    rep.d = worlds::world_dim(world);
    rep.m = cfg.m;
    rep.delta = cfg.delta;
    rep.best_linear_risk = scorer.best_linear;
    try {
      const auto start = std::chrono::steady_clock::now();
      const auto g = fit_estimator(spec, cfg, world, stream, mix(seed));
      const auto stop = std::chrono::steady_clock::now();
      const auto [risk, se] = scorer.risk(g);
      rep.risk = risk;
      rep.risk_se = se;
      rep.excess_risk = risk - scorer.best_linear;
      if (cfg.record_wall_time) rep.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    } catch (const std::exception& e) {
      rep.risk = rep.excess_risk = rep.risk_se = kNaN;
      rep.error = e.what();
    }
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& estimator_ids() {
  static const std::vector<std::string> ids{"erm", "trunc_ls", "fw", "proj", "robust_proj", "aggregator", "agg_finite"};
  return ids;
}

void ExperimentConfig::validate() const {
  require(n >= 1, "n must be >= 1");
  require(replications >= 1, "replications must be >= 1");
  require(workers >= 1, "workers must be >= 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(m > 0.0 && std::isfinite(m), "m must be positive");
  require(holdout_size >= 2, "holdout_size must be >= 2");
  require(!estimators.empty(), "at least one estimator is required");
  for (const auto& spec : estimators) check_spec(spec);
  for (const double q : quantiles) require(q >= 0.0 && q <= 1.0, "quantiles must lie in [0, 1]");
}

ExperimentConfig config_from_json(const Json& j) {
  require(j.is_object(), "experiment config must be a JSON object");
  static const std::set<std::string> known{"world",        "estimators",   "n",         "replications",
                                           "base_seed",    "delta",        "m",         "output_path",
                                           "workers",      "risk_mode",    "holdout_size", "holdout_seed",
                                           "quantiles",    "thresholds",   "record_wall_time"};
  for (const auto& [key, value] : j.items()) require(known.count(key) == 1, "unknown config field '" + key + "'");
  try {
    ExperimentConfig cfg;
    require(j.contains("world"), "missing field 'world'");
    cfg.world = json_io::world_spec_from_json(j["world"]);
    require(j.contains("estimators") && j["estimators"].is_array(), "'estimators' must be an array");
    for (const auto& e : j["estimators"]) {
      if (e.is_string()) {
        cfg.estimators.push_back({e.get<std::string>(), Json::object()});
      } else {
        require(e.is_object() && e.contains("id") && e["id"].is_string(), "estimator entries need a string 'id'");
        cfg.estimators.push_back({e["id"].get<std::string>(), e.value("options", Json::object())});
      }
    }
    require(j.contains("n") && j["n"].is_number_integer(), "'n' must be an integer");
    cfg.n = j["n"].get<int>();
    cfg.replications = j.value("replications", cfg.replications);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.m = j.value("m", cfg.m);
    cfg.output_path = j.value("output_path", cfg.output_path);
    cfg.workers = j.value("workers", cfg.workers);
    const auto mode = j.value("risk_mode", std::string("auto"));
    if (mode == "auto") {
      cfg.risk_mode = RiskMode::Auto;
    } else if (mode == "exact") {
      cfg.risk_mode = RiskMode::Exact;
    } else if (mode == "monte_carlo") {
      cfg.risk_mode = RiskMode::MonteCarlo;
    } else {
      throw ContractViolation("risk_mode must be 'auto', 'exact' or 'monte_carlo'");
    }
    cfg.holdout_size = j.value("holdout_size", cfg.holdout_size);
    cfg.holdout_seed = j.value("holdout_seed", cfg.holdout_seed);
    cfg.quantiles = j.value("quantiles", cfg.quantiles);
    cfg.thresholds = j.value("thresholds", cfg.thresholds);
    cfg.record_wall_time = j.value("record_wall_time", cfg.record_wall_time);
    cfg.validate();
    return cfg;
  } catch (const Json::exception& e) {
    throw ContractViolation(std::string("malformed experiment config: ") + e.what());
  }
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json estimators = Json::array();
  for (const auto& e : cfg.estimators) estimators.push_back({{"id", e.id}, {"options", e.options}});
  const char* mode = cfg.risk_mode == RiskMode::Auto ? "auto" : cfg.risk_mode == RiskMode::Exact ? "exact" : "monte_carlo";
  return {{"world", json_io::world_spec_to_json(cfg.world)},
          {"estimators", estimators},
          {"n", cfg.n},
          {"replications", cfg.replications},
          {"base_seed", cfg.base_seed},
          {"delta", cfg.delta},
          {"m", cfg.m},
          {"output_path", cfg.output_path},
          {"workers", cfg.workers},
          {"risk_mode", mode},
          {"holdout_size", cfg.holdout_size},
          {"holdout_seed", cfg.holdout_seed},
          {"quantiles", cfg.quantiles},
          {"thresholds", cfg.thresholds},
          {"record_wall_time", cfg.record_wall_time}};
}

Eigen::Index required_sample_size(const EstimatorSpec& spec, int n) {
  if (spec.id == "aggregator") return 3 * static_cast<Eigen::Index>(n);
  if (spec.id == "agg_finite") return (spec.options.contains("dictionary") ? 2 : 3) * static_cast<Eigen::Index>(n);
  return n;
}

Predictor fit_estimator(const EstimatorSpec& spec, const ExperimentConfig& cfg, const worlds::World& world,
                        const LabeledSample& stream, std::uint64_t seed) {
  const auto need = required_sample_size(spec, cfg.n);
  require(stream.size() >= need, "fit_estimator: sample stream too short for '" + spec.id + "'");
  const auto& opt = spec.options;
  const Eigen::Index n = cfg.n;

  if (spec.id == "erm") return estimators::fit_erm(stream.slice(0, n));
  if (spec.id == "trunc_ls") return estimators::fit_truncated_ls(stream.slice(0, n), option_number(opt, "m", cfg.m));
  if (spec.id == "fw") {
    std::optional<double> clip;
    if (opt.contains("m_clip") && !opt["m_clip"].is_null()) clip = option_number(opt, "m_clip", cfg.m);
    return estimators::fit_forster_warmuth(stream.slice(0, n), clip);
  }
  if (spec.id == "proj" || spec.id == "robust_proj") {
    const estimators::KnownCovariance kc(worlds::world_covariance(world));
    if (spec.id == "proj") return estimators::fit_projection(stream.slice(0, n), kc);
    return estimators::fit_robust_projection(stream.slice(0, n), kc, option_number(opt, "delta", cfg.delta),
                                             robust_kind(opt));
  }
  if (spec.id == "aggregator") {
    AggregatorConfig base;
    base.m = cfg.m;
    base.delta = cfg.delta;
    const auto agg_cfg = json_io::aggregator_config_from_json(opt, base);
    return aggregator::fit_aggregator(stream.slice(0, need), agg_cfg, seed).predictor;
  }
  if (spec.id == "agg_finite") {
    const double m = option_number(opt, "m", cfg.m);
    const double delta = option_number(opt, "delta", cfg.delta);
    std::vector<Predictor> dict;
    Eigen::Index first = 0;
    if (opt.contains("dictionary")) {
      require(opt["dictionary"].is_array(), "agg_finite option 'dictionary' must be an array");
      for (const auto& p : opt["dictionary"]) dict.push_back(json_io::predictor_from_json(p));
    } else {
      // Default dictionary: the baselines fitted on an independent first part.
      const auto fit_part = stream.slice(0, n);
      dict = {ZeroPredictor{stream.dim()}, estimators::fit_erm(fit_part), estimators::fit_truncated_ls(fit_part, m),
              estimators::fit_forster_warmuth(fit_part)};
      first = n;
    }
    return aggregator::fit_finite_dictionary(stream.slice(first, 2 * n), dict, m, delta).predictor;
  }
  throw ContractViolation("unknown estimator id '" + spec.id + "'");
}

std::vector<RiskReport> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto world = worlds::build_world(cfg.world);
  const auto scorer = make_scorer(cfg, world);
  Eigen::Index stream_size = 0;
  for (const auto& spec : cfg.estimators) stream_size = std::max(stream_size, required_sample_size(spec, cfg.n));

  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<std::vector<RiskReport>> slots(reps);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      slots[r] = run_replication(cfg, world, scorer, stream_size, static_cast<int>(r));
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), reps);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<RiskReport> out;
  out.reserve(reps * cfg.estimators.size());
  for (auto& slot : slots) {
    for (auto& rep : slot) out.push_back(std::move(rep));
  }
  return out;
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double level) {
  require(!values.empty(), "quantile: no values");
  require(level >= 0.0 && level <= 1.0, "quantile: level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<EstimatorSummary> summarize(const std::vector<RiskReport>& reports, const std::vector<double>& quantiles,
                                        const std::vector<double>& thresholds) {
  require(!reports.empty(), "summarize: no reports");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RiskReport*>> groups;
  for (const auto& r : reports) {
    if (groups.find(r.estimator_id) == groups.end()) order.push_back(r.estimator_id);
    groups[r.estimator_id].push_back(&r);
  }

  std::vector<EstimatorSummary> out;
  for (const auto& id : order) {
    EstimatorSummary s;
    s.estimator_id = id;
    std::vector<double> xs;
    const RiskReport* first = groups[id].front();
    for (const auto* r : groups[id]) {
      if (r->error || !std::isfinite(r->excess_risk)) {
        ++s.errors;
      } else {
        xs.push_back(r->excess_risk);
      }
    }
    s.count = xs.size();
    if (xs.empty()) {
      s.mean = s.standard_error = s.min = s.max = s.negative_frequency = s.c_hat = kNaN;
      for (const double q : quantiles) s.quantiles[q] = kNaN;
      for (const double t : thresholds) s.failure_frequency[t] = kNaN;
      out.push_back(std::move(s));
      continue;
    }
    const auto count = static_cast<double>(xs.size());
    double sum = 0.0;
    for (const double x : xs) sum += x;
    s.mean = sum / count;
    double ss = 0.0;
    for (const double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.standard_error = xs.size() > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    s.min = *lo;
    s.max = *hi;
    for (const double q : quantiles) s.quantiles[q] = quantile(xs, q);
    s.negative_frequency =
        static_cast<double>(std::count_if(xs.begin(), xs.end(), [](double x) { return x < -kNegativeTolerance; })) /
        count;
    for (const double t : thresholds) {
      s.failure_frequency[t] =
          static_cast<double>(std::count_if(xs.begin(), xs.end(), [t](double x) { return x >= t; })) / count;
    }
    const double n = static_cast<double>(first->n);
    const double d = static_cast<double>(first->d);
    const double rate = d * std::log(std::max(n / d, 1.0)) + std::log(1.0 / first->delta);
    s.c_hat = quantile(xs, 1.0 - first->delta) * n / (first->m * first->m * rate);
    out.push_back(std::move(s));
  }
  return out;
}

Json summary_to_json(const std::vector<EstimatorSummary>& summary) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json out = Json::array();
  for (const auto& s : summary) {
    Json qs = Json::object();
    for (const auto& [level, value] : s.quantiles) qs[format_number(level)] = num(value);
    Json fs = Json::object();
    for (const auto& [t, value] : s.failure_frequency) fs[format_number(t)] = num(value);
    out.push_back({{"estimator_id", s.estimator_id},
                   {"count", s.count},
                   {"errors", s.errors},
                   {"mean", num(s.mean)},
                   {"standard_error", num(s.standard_error)},
                   {"min", num(s.min)},
                   {"max", num(s.max)},
                   {"quantiles", qs},
                   {"negative_frequency", num(s.negative_frequency)},
                   {"failure_frequency", fs},
                   {"c_hat", num(s.c_hat)}});
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<RiskReport>& reports) {
  out << "estimator_id,replication,seed,n,d,m,delta,risk,best_linear_risk,excess_risk,wall_ms\n";
  for (const auto& r : reports) {
    out << r.estimator_id << ',' << r.replication << ',' << r.seed << ',' << r.n << ',' << r.d << ','
        << format_number(r.m) << ',' << format_number(r.delta) << ',' << format_number(r.risk) << ','
        << format_number(r.best_linear_risk) << ',' << format_number(r.excess_risk) << ','
        << format_number(r.wall_ms) << '\n';
  }
}

}  // namespace dfreg::harness
