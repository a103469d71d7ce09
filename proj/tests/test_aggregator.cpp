#include "doctest.h"

#include "dfreg/aggregator.hpp"
#include "dfreg/worlds.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace dfreg;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

const Vector kWstar = vec2(0.3, -0.2);

// Noiseless linear world with 20 atoms, |x| <= 2 so |y| <= 0.73.
FiniteWorld realizable_world(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Atom> atoms;
  for (int a = 0; a < 20; ++a) {
    Vector x = vec2(normal(rng), normal(rng));
    if (x.norm() > 2.0) x *= 2.0 / x.norm();
    atoms.push_back({x, x.dot(kWstar), 0.05});
  }
  return FiniteWorld(atoms);
}

// Linear signal plus a +-0.5 label flip at every x.
FiniteWorld noisy_world(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Atom> atoms;
  for (int a = 0; a < 10; ++a) {
    const Vector x = vec2(normal(rng), normal(rng));
    const double mean = std::clamp(x.dot(kWstar), -0.5, 0.5);
    atoms.push_back({x, mean + 0.5, 0.05});
    atoms.push_back({x, mean - 0.5, 0.05});
  }
  return FiniteWorld(atoms);
}

double l2_gap_sq(const FiniteWorld& w, const Predictor& f, const Predictor& g) {
  double total = 0.0;
  for (const auto& atom : w.atoms()) {
    const double diff = evaluate(f, atom.x) - evaluate(g, atom.x);
    total += atom.p * diff * diff;
  }
  return total;
}

double l2_diameter(const FiniteWorld& w, const std::vector<Predictor>& fs) {
  double worst = 0.0;
  for (const auto& f : fs) {
    for (const auto& g : fs) worst = std::max(worst, l2_gap_sq(w, f, g));
  }
  return std::sqrt(worst);
}

std::size_t brute_force_minmax(const Matrix& mom) {
  std::size_t best = 0;
  double best_value = mom.row(0).maxCoeff();
  for (Eigen::Index g = 1; g < mom.rows(); ++g) {
    const double v = mom.row(g).maxCoeff();
    if (v < best_value) {
      best_value = v;
      best = static_cast<std::size_t>(g);
    }
  }
  return best;
}

std::vector<Predictor> random_predictors(std::mt19937_64& rng, int count, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Predictor> out;
  for (int c = 0; c < count; ++c) {
    Vector w(d);
    for (int j = 0; j < d; ++j) w[j] = 0.5 * normal(rng);
    out.emplace_back(TruncatedLinear{w, 1.0});
    // Repeat some candidates so ties are exercised.
    if (c % 5 == 4) out.push_back(out[out.size() - 2]);
  }
  return out;
}

}  // namespace

TEST_CASE("constant examples") {
  // 32 sqrt((log 8 + log 100) / 1024) and ceil(8 log 800).
  CHECK(aggregator::class_alpha(4, 0.04, 1024, 1.0) == doctest::Approx(2.5854616082370914).epsilon(1e-13));
  CHECK(aggregator::class_blocks(4, 0.04) == 54);

  for (const std::size_t size : {1U, 2U, 7U, 40U}) {
    const auto c = aggregator::default_constants(size, 300, 2, 1.5, 0.02);
    const double g = static_cast<double>(size);
    CHECK(c.k == static_cast<int>(std::ceil(8.0 * std::log(2.0 * g * g * 3.0 / 0.02))));
    CHECK(c.alpha ==
          doctest::Approx(32.0 * std::sqrt(1.5 * 1.5 * (std::log(2.0 * g * g) + std::log(12.0 / 0.02)) / 300.0))
              .epsilon(1e-13));
  }
  CHECK_THROWS_AS((void)aggregator::default_constants(0, 10, 1, 1.0, 0.1), ContractViolation);
}

TEST_CASE("feasible_net_size") {
  for (const double delta : {0.01, 0.02, 0.1}) {
    for (const int n : {10, 40, 60, 100, 300}) {
      const int size = aggregator::feasible_net_size(n, delta);
      if (size >= 1) CHECK(aggregator::class_blocks(size, delta / 3.0) <= n);
      // Sizes beyond a million are clamped; no pool gets near that.
      if (size < 1000000) CHECK(aggregator::class_blocks(size + 1, delta / 3.0) > n);
    }
  }
  CHECK(aggregator::feasible_net_size(10, 0.01) == 0);
}

TEST_CASE("filter examples") {
  const auto world = noisy_world(1);
  const auto s2 = worlds::sample(world, 200, 3);
  const std::vector<Predictor> single{TruncatedLinear{kWstar, 1.0}};
  for (const int k : {1, 7, 200}) {
    for (const double alpha : {1e-6, 0.3, 10.0}) {
      const auto r = aggregator::filter(single, s2, k, alpha);
      CHECK(r.survivors == std::vector<std::size_t>{0});
      CHECK(!r.fallback);
      CHECK(r.k_used == k);
      CHECK(r.alpha_used == alpha);
    }
  }

  std::mt19937_64 rng(2);
  const auto net = random_predictors(rng, 12, 2);
  const auto all = aggregator::filter(net, s2, 10, 1e6);
  CHECK(all.survivors.size() == net.size());

  // Tiny alpha: the threshold is ~0 and the survivors are weak MOM minimizers.
  const auto strict = aggregator::filter(net, s2, 10, 1e-12);
  CHECK(!strict.survivors.empty());
  CHECK_THROWS_AS((void)aggregator::filter(net, s2, 201, 1.0), ContractViolation);
}

TEST_CASE("filter keeps the risk minimizer of a two-element net") {
  const auto world = realizable_world(4);
  const Predictor best = TruncatedLinear{kWstar, 1.0};
  const Predictor bad = TruncatedLinear{-kWstar, 1.0};
  REQUIRE(worlds::exact_risk(world, best) <= 1e-20);
  REQUIRE(worlds::exact_risk(world, bad) > 0.1);
  const auto c = aggregator::default_constants(2, 2000, 2, 1.0, 0.05);
  int kept = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto s2 = worlds::sample(world, 2000, 10000 + static_cast<std::uint64_t>(t));
    const auto r = aggregator::filter({best, bad}, s2, c.k, c.alpha);
    kept += std::find(r.survivors.begin(), r.survivors.end(), 0) != r.survivors.end() ? 1 : 0;
  }
  CHECK(kept >= 990);
}

TEST_CASE("property: filter soundness at delta = 0.1") {
  const double delta = 0.1;
  const auto world = noisy_world(5);
  std::mt19937_64 rng(6);
  const auto net = random_predictors(rng, 6, 2);
  std::size_t minimizer = 0;
  for (std::size_t i = 1; i < net.size(); ++i) {
    if (worlds::exact_risk(world, net[i]) < worlds::exact_risk(world, net[minimizer])) minimizer = i;
  }
  const int n = 300;
  const auto c = aggregator::default_constants(net.size(), n, 2, 1.0, delta);
  int kept = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto s2 = worlds::sample(world, n, 20000 + static_cast<std::uint64_t>(t));
    const auto r = aggregator::filter(net, s2, c.k, c.alpha);
    kept += std::find(r.survivors.begin(), r.survivors.end(), minimizer) != r.survivors.end() ? 1 : 0;
  }
  MESSAGE("risk minimizer kept in " << kept << " of " << trials);
  CHECK(kept >= (1.0 - 3.0 * delta) * trials);
}

TEST_CASE("midpoints") {
  for (std::size_t s = 1; s <= 9; ++s) {
    const auto pairs = aggregator::midpoint_pairs(s);
    CHECK(pairs.size() == s * (s + 1) / 2);
    for (const auto& [i, j] : pairs) CHECK(i <= j);
    for (std::size_t i = 0; i < s; ++i) {
      CHECK(std::find(pairs.begin(), pairs.end(), std::make_pair(i, i)) != pairs.end());
    }
  }
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto fs = random_predictors(rng, 3, 2);
  REQUIRE(fs.size() == 3);
  const auto mids = aggregator::midpoints({fs[0], fs[1]});
  CHECK(mids.size() == 3);
  for (int q = 0; q < 100; ++q) {
    const Vector x = vec2(normal(rng), normal(rng)) * 3.0;
    CHECK(evaluate(mids[0], x) == evaluate(fs[0], x));
    CHECK(evaluate(mids[1], x) == (evaluate(fs[0], x) + evaluate(fs[1], x)) / 2.0);
    CHECK(evaluate(mids[2], x) == evaluate(fs[1], x));
  }

  const auto world = noisy_world(8);
  const auto s = worlds::sample(world, 50, 9);
  const aggregator::PredictionCache cache(fs, s);
  const auto pairs = aggregator::midpoint_pairs(fs.size());
  const auto mid_cache = aggregator::PredictionCache::midpoints_of(cache, pairs);
  const auto mid_preds = aggregator::midpoints(fs);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      CHECK(mid_cache.predictions()(static_cast<Eigen::Index>(r), i) == evaluate(mid_preds[r], s.x(i)));
    }
  }
}

TEST_CASE("minmax_select examples") {
  const auto world = realizable_world(10);
  const auto s3 = worlds::sample(world, 100, 11);
  const Predictor only = TruncatedLinear{vec2(1.0, 1.0), 1.0};
  const auto chosen = aggregator::minmax_select({only}, s3, 5);
  CHECK(evaluate(chosen, vec2(0.2, 0.1)) == evaluate(only, vec2(0.2, 0.1)));

  const Predictor best = TruncatedLinear{kWstar, 1.0};
  const Predictor bad = ZeroPredictor{2};
  const int k = aggregator::class_blocks(2, 0.05);
  int right = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto s = worlds::sample(world, 2000, 30000 + static_cast<std::uint64_t>(t));
    const aggregator::PredictionCache cache({bad, best}, s);
    right += aggregator::minmax_select(cache, k).index == 1 ? 1 : 0;
  }
  CHECK(right >= 990);
}

TEST_CASE("property: MOM matrix and pruned min-max against brute force") {
  std::mt19937_64 rng(12);
  const auto world = noisy_world(13);
  for (int t = 0; t < 40; ++t) {
    const auto preds = random_predictors(rng, 3 + t % 12, 2);
    const auto s = worlds::sample(world, 60 + t, 40000 + static_cast<std::uint64_t>(t));
    const aggregator::PredictionCache cache(preds, s);
    for (const int k : {1, 2, 5, 8}) {
      const Matrix m = aggregator::mom_matrix(cache, k);
      CHECK(m.diagonal().isZero(0.0));
      CHECK(m == -m.transpose());
      const auto sel = aggregator::minmax_select(cache, k);
      const std::size_t expected = brute_force_minmax(m);
      CHECK(sel.index == expected);
      CHECK(sel.value == m.row(static_cast<Eigen::Index>(expected)).maxCoeff());
    }
  }
}

TEST_CASE("fit_aggregator falls back to zero below the block threshold") {
  RowMatrix xs(30, 1);
  Vector ys(30);
  for (int i = 0; i < 30; ++i) {
    xs(i, 0) = 1.0 + i % 3;
    ys[i] = 0.5 * xs(i, 0);
  }
  const LabeledSample s(xs, ys);
  AggregatorConfig cfg;
  cfg.delta = 0.01;
  const auto fit = aggregator::fit_aggregator(s, cfg, 1);
  CHECK(fit.predictor.is<ZeroPredictor>());
  CHECK(fit.diagnostics.zero_fallback);
  CHECK(fit.diagnostics.k > 10);

  cfg.k = 11;
  const auto forced = aggregator::fit_aggregator(s, cfg, 1);
  CHECK(forced.predictor.is<ZeroPredictor>());
  CHECK(forced.diagnostics.zero_fallback);

  cfg.k = 2;
  cfg.alpha = 0.5;
  const auto small = aggregator::fit_aggregator(s, cfg, 1);
  CHECK(!small.diagnostics.zero_fallback);
}

TEST_CASE("fit_aggregator on a realizable noiseless world") {
  const auto world = realizable_world(14);
  AggregatorConfig cfg;
  cfg.delta = 0.05;
  int good = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto s = worlds::sample(world, 3000, 50000 + static_cast<std::uint64_t>(t));
    const auto fit = aggregator::fit_aggregator(s, cfg, static_cast<std::uint64_t>(t));
    good += worlds::exact_risk(world, fit.predictor) <= 0.02 ? 1 : 0;
  }
  MESSAGE("excess <= 0.02 in " << good << " of " << trials);
  CHECK(good >= 0.95 * trials);
}

TEST_CASE("property: determinism and the trivial risk bound") {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 12; ++t) {
    const auto world = oracles::random_world(rng, 6, 1 + t % 3);
    const auto s = worlds::sample(world, 150, 60000 + static_cast<std::uint64_t>(t));
    AggregatorConfig cfg;
    cfg.m = 0.5 + 0.25 * (t % 4);
    cfg.delta = 0.1;
    const auto a = aggregator::fit_aggregator(s, cfg, 99);
    const auto b = aggregator::fit_aggregator(s, cfg, 99);
    for (const auto& atom : world.atoms()) {
      CHECK(evaluate(a.predictor, atom.x) == evaluate(b.predictor, atom.x));
      CHECK(std::abs(evaluate(a.predictor, atom.x)) <= cfg.m);
    }
    CHECK(worlds::exact_risk(world, a.predictor) <= 4.0 * cfg.m * cfg.m + 2.0 * world.second_moment_y());
  }
}

TEST_CASE("property: parallelogram identity on survivors") {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 20; ++t) {
    const auto world = oracles::random_world(rng, 8, 2);
    const auto net = random_predictors(rng, 6, 2);
    const auto s2 = worlds::sample(world, 200, 70000 + static_cast<std::uint64_t>(t));
    const auto kept = aggregator::filter(net, s2, 5, 0.5);
    for (const auto gi : kept.survivors) {
      for (const auto hi : kept.survivors) {
        const Predictor mid = make_midpoint(net[gi], net[hi]);
        const double lhs = worlds::exact_risk(world, mid);
        const double rhs = 0.5 * (worlds::exact_risk(world, net[gi]) + worlds::exact_risk(world, net[hi])) -
                           0.25 * l2_gap_sq(world, net[gi], net[hi]);
        CHECK(std::abs(lhs - rhs) <= 1e-10);
      }
    }
  }
}

TEST_CASE("finite dictionary") {
  const auto world = noisy_world(17);
  const auto s = worlds::sample(world, 400, 18);
  const Predictor wide = LinearPredictor{vec2(5.0, 0.0)};
  const auto one = aggregator::fit_finite_dictionary(s, {wide}, 1.0, 0.05);
  for (const auto& atom : world.atoms()) {
    CHECK(evaluate(one.predictor, atom.x) == std::clamp(evaluate(wide, atom.x), -1.0, 1.0));
  }
  CHECK(one.diagnostics.k == aggregator::class_blocks(1.0, 0.025));

  const auto tiny = aggregator::fit_finite_dictionary(worlds::sample(world, 20, 1), {wide, wide}, 1.0, 0.05);
  CHECK(tiny.predictor.is<ZeroPredictor>());
  CHECK(tiny.diagnostics.zero_fallback);
}

TEST_CASE("finite dictionary selects within 2 alpha D") {
  const auto world = noisy_world(19);
  const std::vector<Predictor> dict{LinearPredictor{kWstar}, LinearPredictor{vec2(-1.0, 2.0)},
                                    TruncatedLinear{vec2(0.0, -3.0), 0.4}};
  std::vector<Predictor> bounded;
  for (const auto& f : dict) bounded.emplace_back(Truncated{share(f), 1.0});
  double best = worlds::exact_risk(world, bounded[0]);
  for (const auto& f : bounded) best = std::min(best, worlds::exact_risk(world, f));
  const double diameter = l2_diameter(world, bounded);
  const int n = 4000;
  const double delta = 0.05;
  const double alpha = aggregator::class_alpha(9.0, delta / 2.0, n / 2, 1.0);
  int ok = 0;
  int exact = 0;
  for (int t = 0; t < 200; ++t) {
    const auto s = worlds::sample(world, n, 80000 + static_cast<std::uint64_t>(t));
    const auto fit = aggregator::fit_finite_dictionary(s, dict, 1.0, delta);
    const double excess = worlds::exact_risk(world, fit.predictor) - best;
    ok += excess <= 2.0 * alpha * diameter ? 1 : 0;
    exact += excess <= 1e-12 ? 1 : 0;
  }
  CHECK(ok >= 198);
  MESSAGE("exact minimizer (or an equal-risk midpoint) returned in " << exact << " of 200");
}

TEST_CASE("finite dictionary with two equal-risk optima") {
  // x in {e1, e2} with equal mass and y = 0.5 at both: predicting 0.5 on one
  // axis and 0 on the other gives the same risk for either axis.
  std::vector<Atom> atoms{{vec2(1.0, 0.0), 0.5, 0.5}, {vec2(0.0, 1.0), 0.5, 0.5}};
  const FiniteWorld world(atoms);
  const std::vector<Predictor> dict{LinearPredictor{vec2(0.5, 0.0)}, LinearPredictor{vec2(0.0, 0.5)},
                                    LinearPredictor{vec2(-1.0, -1.0)}};
  const double r0 = worlds::exact_risk(world, dict[0]);
  REQUIRE(r0 == worlds::exact_risk(world, dict[1]));
  std::vector<Predictor> bounded;
  for (const auto& f : dict) bounded.emplace_back(Truncated{share(f), 1.0});
  const double diameter = l2_diameter(world, bounded);
  const double alpha = aggregator::class_alpha(9.0, 0.025, 1000, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto s = worlds::sample(world, 2000, 90000 + static_cast<std::uint64_t>(t));
    const auto fit = aggregator::fit_finite_dictionary(s, dict, 1.0, 0.05);
    const double r = worlds::exact_risk(world, fit.predictor);
    CHECK(r <= r0 + 2.0 * alpha * diameter);
    CHECK(r <= r0 + 1e-12);
  }
}
