// dfreg: command-line front end for simulations, world inspection, net
// construction and risk evaluation.

#include "dfreg/cover.hpp"
#include "dfreg/harness.hpp"
#include "dfreg/json_io.hpp"
#include "dfreg/worlds.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using dfreg::json_io::Json;

constexpr int kConfigError = 2;
constexpr int kReplicationError = 3;

struct AggregatorOverrides {
  std::optional<int> k;
  std::optional<double> alpha;
  std::optional<double> eps;
  std::optional<int> net_cap;
  std::optional<int> pool_size;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--k", k, "Block count for the aggregator's median-of-means");
    cmd.add_option("--alpha", alpha, "Filter threshold scale");
    cmd.add_option("--eps", eps, "Empirical L1 net radius");
    cmd.add_option("--net-cap", net_cap, "Maximum net size");
    cmd.add_option("--pool-size", pool_size, "Candidate pool size");
  }

  void apply(Json& options) const {
    if (k) options["k"] = *k;
    if (alpha) options["alpha"] = *alpha;
    if (eps) options["eps"] = *eps;
    if (net_cap) options["net_cap"] = *net_cap;
    if (pool_size) options["pool_size"] = *pool_size;
  }
};

int simulate(const std::string& config_path, const std::string& output, std::optional<int> workers,
             std::optional<int> replications, const AggregatorOverrides& overrides) {
  auto cfg = dfreg::harness::config_from_json(dfreg::json_io::read_file(config_path));
  if (!output.empty()) cfg.output_path = output;
  if (workers) cfg.workers = *workers;
  if (replications) cfg.replications = *replications;
  for (auto& spec : cfg.estimators) {
    if (spec.id == "aggregator") overrides.apply(spec.options);
  }
  cfg.validate();
  if (cfg.output_path.empty()) {
    cfg.output_path = std::filesystem::path(config_path).replace_extension(".csv").string();
  }

  const auto reports = dfreg::harness::run_experiment(cfg);
  std::ofstream csv(cfg.output_path);
  if (!csv) throw std::runtime_error("cannot write '" + cfg.output_path + "'");
  dfreg::harness::write_csv(csv, reports);

  const auto summary = dfreg::harness::summarize(reports, cfg.quantiles, cfg.thresholds);
  const Json doc = {{"config", dfreg::harness::config_to_json(cfg)},
                    {"summary", dfreg::harness::summary_to_json(summary)}};
  std::ofstream(cfg.output_path + ".summary.json") << doc.dump(2) << '\n';
  std::cout << doc["summary"].dump(2) << '\n';

  std::size_t failed = 0;
  for (const auto& r : reports) {
    if (r.error) {
      if (failed++ < 5) std::cerr << r.estimator_id << " replication " << r.replication << ": " << *r.error << '\n';
    }
  }
  if (failed > 0) {
    std::cerr << failed << " estimator fits failed\n";
    return kReplicationError;
  }
  return 0;
}

int describe_world(const std::string& path) {
  const auto world = dfreg::json_io::world_from_json(dfreg::json_io::read_file(path));
  Json out = {{"dim", dfreg::worlds::world_dim(world)},
              {"declared_m", dfreg::worlds::world_declared_m(world)},
              {"covariance", dfreg::json_io::matrix_to_json(dfreg::worlds::world_covariance(world))}};
  if (const auto* finite = std::get_if<dfreg::FiniteWorld>(&world)) {
    const auto best = dfreg::worlds::best_linear_risk(*finite);
    out["kind"] = "finite";
    out["atoms"] = dfreg::json_io::finite_world_to_json(*finite)["atoms"];
    out["conditional_bound"] = finite->conditional_bound();
    out["second_moment_y"] = finite->second_moment_y();
    out["best_linear_w"] = dfreg::json_io::vector_to_json(best.w);
    out["best_linear_risk"] = best.risk;
  } else {
    const auto& sampling = std::get<dfreg::worlds::SamplingWorld>(world);
    out["kind"] = "sampling";
    out["w0"] = dfreg::json_io::vector_to_json(sampling.w0());
    if (auto closed = sampling.best_linear_closed_form()) {
      out["best_linear_w"] = dfreg::json_io::vector_to_json(closed->second);
      out["best_linear_risk"] = closed->first;
    }
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct NetArgs {
  std::string world;
  int n = 100;
  std::uint64_t seed = 0;
  double m = 1.0;
  double delta = 0.05;
  std::string out;
  std::string distances;
};

int build_net(const NetArgs& args, const AggregatorOverrides& overrides) {
  const auto world = dfreg::json_io::world_from_json(dfreg::json_io::read_file(args.world));
  Json options = {{"m", args.m}, {"delta", args.delta}};
  overrides.apply(options);
  const auto cfg = dfreg::json_io::aggregator_config_from_json(options);
  const auto s1 = dfreg::worlds::sample(world, args.n, args.seed);
  const double eps = dfreg::cover::resolve_eps(cfg, s1.size(), s1.dim());
  const int cap = cfg.net_cap.value_or(dfreg::cover::default_net_cap(s1.size(), s1.dim()));
  const auto pool = dfreg::cover::build_candidate_pool(s1, cfg, args.seed);
  const auto net = dfreg::cover::build_net(pool, eps, cap, s1);

  Json members = Json::array();
  for (const auto& f : net.members) members.push_back(dfreg::json_io::predictor_to_json(f));
  const Json doc = {{"eps", net.eps},
                    {"net_cap", cap},
                    {"pool_size", net.pool_size_used},
                    {"covering_radius", net.covering_radius},
                    {"truncated", net.truncated},
                    {"pool_indices", net.pool_indices},
                    {"members", members}};
  if (args.out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::ofstream(args.out) << doc.dump(2) << '\n';
  }
  if (!args.distances.empty()) {
    const auto dist = dfreg::cover::net_distance_matrix(net);
    std::ofstream csv(args.distances);
    csv.precision(17);
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      for (Eigen::Index j = 0; j < dist.cols(); ++j) csv << (j ? "," : "") << dist(i, j);
      csv << '\n';
    }
  }
  return 0;
}

int eval_risk(const std::string& predictor_path, const std::string& world_path, Eigen::Index holdout_size,
              std::uint64_t seed) {
  const auto g = dfreg::json_io::predictor_from_json(dfreg::json_io::read_file(predictor_path));
  const auto world = dfreg::json_io::world_from_json(dfreg::json_io::read_file(world_path));
  Json out;
  if (const auto* finite = std::get_if<dfreg::FiniteWorld>(&world)) {
    const double risk = dfreg::worlds::exact_risk(*finite, g);
    const double best = dfreg::worlds::best_linear_risk(*finite).risk;
    out = {{"risk", risk}, {"best_linear_risk", best}, {"excess_risk", risk - best}, {"method", "exact"}};
  } else {
    const auto holdout = dfreg::worlds::sample(world, holdout_size, seed);
    const auto mc = dfreg::worlds::monte_carlo_risk(holdout, g);
    out = {{"risk", mc.mean}, {"risk_se", mc.standard_error}, {"method", "monte_carlo"}};
    if (auto closed = std::get<dfreg::worlds::SamplingWorld>(world).best_linear_closed_form()) {
      out["best_linear_risk"] = closed->first;
      out["excess_risk"] = mc.mean - closed->first;
    }
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-free linear regression experiments"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment and write CSV plus summary JSON");
  std::string config_path;
  std::string output;
  std::optional<int> workers;
  std::optional<int> replications;
  AggregatorOverrides sim_overrides;
  sim->add_option("config", config_path, "Experiment configuration (JSON)")->required();
  sim->add_option("-o,--output", output, "CSV output path (overrides output_path)");
  sim->add_option("--workers", workers, "Worker threads");
  sim->add_option("--replications", replications, "Number of replications");
  sim_overrides.add_to(*sim);

  auto* world_cmd = app.add_subcommand("world", "Inspect worlds");
  world_cmd->require_subcommand(1);
  auto* describe = world_cmd->add_subcommand("describe", "Print covariance, best linear predictor and risk");
  std::string world_path;
  describe->add_option("spec", world_path, "World spec or finite world (JSON)")->required();

  auto* net_cmd = app.add_subcommand("net", "Empirical L1 nets");
  net_cmd->require_subcommand(1);
  auto* net_build = net_cmd->add_subcommand("build", "Sample from a world and build the net");
  NetArgs net_args;
  AggregatorOverrides net_overrides;
  net_build->add_option("--world", net_args.world, "World spec (JSON)")->required();
  net_build->add_option("--n", net_args.n, "Sample size");
  net_build->add_option("--seed", net_args.seed, "Sampling and pool seed");
  net_build->add_option("--m", net_args.m, "Truncation level");
  net_build->add_option("--delta", net_args.delta, "Confidence parameter");
  net_build->add_option("--out", net_args.out, "Net JSON output (default stdout)");
  net_build->add_option("--distances", net_args.distances, "Pairwise distance CSV output");
  net_overrides.add_to(*net_build);

  auto* risk_cmd = app.add_subcommand("risk", "Risk evaluation");
  risk_cmd->require_subcommand(1);
  auto* eval = risk_cmd->add_subcommand("eval", "Risk of a predictor under a world");
  std::string predictor_path;
  std::string eval_world;
  Eigen::Index holdout_size = 1'000'000;
  std::uint64_t holdout_seed = 0;
  eval->add_option("predictor", predictor_path, "Predictor (JSON)")->required();
  eval->add_option("world", eval_world, "World spec or finite world (JSON)")->required();
  eval->add_option("--holdout-size", holdout_size, "Hold-out size for sampling worlds");
  eval->add_option("--seed", holdout_seed, "Hold-out seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*sim) return simulate(config_path, output, workers, replications, sim_overrides);
    if (*describe) return describe_world(world_path);
    if (*net_build) return build_net(net_args, net_overrides);
    if (*eval) return eval_risk(predictor_path, eval_world, holdout_size, holdout_seed);
  } catch (const dfreg::ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
