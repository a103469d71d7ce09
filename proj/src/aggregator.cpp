#include "dfreg/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dfreg::aggregator {

PredictionCache::PredictionCache(const std::vector<Predictor>& predictors, const LabeledSample& s)
    : predictions_(static_cast<Eigen::Index>(predictors.size()), s.size()), ys_(s.ys()) {
  require(!predictors.empty(), "PredictionCache: no predictors");
  for (std::size_t g = 0; g < predictors.size(); ++g) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      predictions_(static_cast<Eigen::Index>(g), i) = evaluate(predictors[g], s.x(i));
    }
  }
}

PredictionCache PredictionCache::midpoints_of(const PredictionCache& base,
                                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  require(!pairs.empty(), "PredictionCache::midpoints_of: no pairs");
  RowMatrix preds(static_cast<Eigen::Index>(pairs.size()), base.sample_size());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [a, b] = pairs[r];
    require(a < base.size() && b < base.size(), "PredictionCache::midpoints_of: index out of range");
    preds.row(static_cast<Eigen::Index>(r)) =
        0.5 * (base.predictions_.row(static_cast<Eigen::Index>(a)) + base.predictions_.row(static_cast<Eigen::Index>(b)));
  }
  return {std::move(preds), base.ys_};
}

std::vector<double> PredictionCache::losses(std::size_t g) const {
  std::vector<double> out(static_cast<std::size_t>(sample_size()));
  for (Eigen::Index i = 0; i < sample_size(); ++i) {
    const double e = predictions_(static_cast<Eigen::Index>(g), i) - ys_[i];
    out[static_cast<std::size_t>(i)] = e * e;
  }
  return out;
}

RowMatrix PredictionCache::block_loss_means(const mom::BlockPartition& part) const {
  RowMatrix out(static_cast<Eigen::Index>(size()), part.k);
  for (std::size_t g = 0; g < size(); ++g) {
    const auto means = mom::block_loss_means(losses(g), part);
    for (int j = 0; j < part.k; ++j) out(static_cast<Eigen::Index>(g), j) = means[static_cast<std::size_t>(j)];
  }
  return out;
}

double PredictionCache::mean_sq_gap(std::size_t f, std::size_t g) const {
  return (predictions_.row(static_cast<Eigen::Index>(f)) - predictions_.row(static_cast<Eigen::Index>(g)))
      .squaredNorm() / static_cast<double>(sample_size());
}

// ---------------------------------------------------------------------------

int class_blocks(double class_size, double delta) {
  require(class_size >= 1.0, "class_blocks: class size must be >= 1");
  require(delta > 0.0 && delta < 1.0, "class_blocks: delta must lie in (0, 1)");
  const double raw = std::ceil(8.0 * std::log(2.0 * class_size * class_size / delta));
  return raw >= static_cast<double>(std::numeric_limits<int>::max()) ? std::numeric_limits<int>::max()
                                                                     : static_cast<int>(raw);
}

double class_alpha(double class_size, double delta, Eigen::Index n, double m) {
  require(class_size >= 1.0 && n >= 1, "class_alpha: need class size >= 1 and n >= 1");
  require(delta > 0.0 && delta < 1.0, "class_alpha: delta must lie in (0, 1)");
  return 32.0 * std::sqrt(m * m * (std::log(2.0 * class_size) + std::log(4.0 / delta)) / static_cast<double>(n));
}

Constants default_constants(std::size_t net_size, Eigen::Index n, Eigen::Index /*d*/, double m, double delta) {
  require(net_size >= 1, "default_constants: net_size must be >= 1");
  const auto size = static_cast<double>(net_size);
  return {class_blocks(size, delta / 3.0), class_alpha(size * size, delta / 3.0, n, m)};
}

int feasible_net_size(Eigen::Index n, double delta) {
  // k(N) <= n  <=>  8 log(6 N^2 / delta) <= n, up to the ceiling.
  const double bound = std::sqrt(delta / 6.0 * std::exp(static_cast<double>(n) / 8.0));
  auto size = static_cast<int>(std::min(bound, 1e6)) + 1;
  while (size >= 1 && class_blocks(static_cast<double>(size), delta / 3.0) > n) --size;
  return size;
}

// ---------------------------------------------------------------------------

FilterResult filter(const PredictionCache& cache, int k, double alpha) {
  require(k >= 1 && k <= cache.sample_size(), "filter: need 1 <= k <= sample size");
  require(alpha > 0.0, "filter: alpha must be positive");
  const auto part = mom::partition(cache.sample_size(), k);
  const RowMatrix blocks = cache.block_loss_means(part);
  const std::size_t count = cache.size();
  FilterResult out;
  out.alpha_used = alpha;
  out.k_used = k;
  out.max_margin.assign(count, -std::numeric_limits<double>::infinity());
  std::vector<double> worst_mom(count, 0.0);
  std::vector<double> scratch;
  const double root2 = std::sqrt(2.0);
  for (std::size_t f = 0; f < count; ++f) {
    const auto bf = std::span<const double>(blocks.row(static_cast<Eigen::Index>(f)).data(), static_cast<std::size_t>(k));
    for (std::size_t g = 0; g < count; ++g) {
      const double stat =
          f == g ? 0.0
                 : mom::mom_of_difference(
                       bf, std::span<const double>(blocks.row(static_cast<Eigen::Index>(g)).data(), static_cast<std::size_t>(k)),
                       scratch);
      const double threshold = root2 * alpha * std::sqrt(cache.mean_sq_gap(f, g)) + alpha * alpha;
      out.max_margin[f] = std::max(out.max_margin[f], stat - threshold);
      worst_mom[f] = std::max(worst_mom[f], stat);
    }
    if (out.max_margin[f] <= 0.0) out.survivors.push_back(f);
  }
  if (out.survivors.empty()) {
    out.fallback = true;
    out.survivors.push_back(
        static_cast<std::size_t>(std::min_element(worst_mom.begin(), worst_mom.end()) - worst_mom.begin()));
  }
  return out;
}

FilterResult filter(const std::vector<Predictor>& net, const LabeledSample& s2, int k, double alpha) {
  return filter(PredictionCache(net, s2), k, alpha);
}

std::vector<std::pair<std::size_t, std::size_t>> midpoint_pairs(std::size_t count) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(count * (count + 1) / 2);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i; j < count; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

std::vector<Predictor> midpoints(const std::vector<Predictor>& survivors) {
  require(!survivors.empty(), "midpoints: no survivors");
  std::vector<PredictorPtr> shared;
  shared.reserve(survivors.size());
  for (const auto& s : survivors) shared.push_back(share(s));
  std::vector<Predictor> out;
  for (const auto& [i, j] : midpoint_pairs(survivors.size())) out.emplace_back(Midpoint{shared[i], shared[j]});
  return out;
}

Matrix mom_matrix(const PredictionCache& cache, int k) {
  require(k >= 1 && k <= cache.sample_size(), "mom_matrix: need 1 <= k <= sample size");
  const auto part = mom::partition(cache.sample_size(), k);
  const RowMatrix blocks = cache.block_loss_means(part);
  const auto count = static_cast<Eigen::Index>(cache.size());
  Matrix out = Matrix::Zero(count, count);
  std::vector<double> scratch;
  for (Eigen::Index g = 0; g < count; ++g) {
    for (Eigen::Index f = g + 1; f < count; ++f) {
      const double v = mom::mom_of_difference(
          std::span<const double>(blocks.row(g).data(), static_cast<std::size_t>(k)),
          std::span<const double>(blocks.row(f).data(), static_cast<std::size_t>(k)), scratch);
      // The even-k median averages the middle pair, so negation is exact.
      out(g, f) = v;
      out(f, g) = -v;
    }
  }
  return out;
}

Selection minmax_select(const PredictionCache& cache, int k) {
  require(k >= 1 && k <= cache.sample_size(), "minmax_select: need 1 <= k <= sample size");
  const auto part = mom::partition(cache.sample_size(), k);
  const RowMatrix blocks = cache.block_loss_means(part);
  const std::size_t count = cache.size();

  // Visit rows and competitors from the smallest empirical loss upwards so
  // strong competitors are met first and losing rows stop early.
  std::vector<double> total(count);
  for (std::size_t g = 0; g < count; ++g) total[g] = blocks.row(static_cast<Eigen::Index>(g)).sum();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total[a] < total[b]; });

  Selection best{count, std::numeric_limits<double>::infinity()};
  std::vector<double> scratch;
  for (const std::size_t g : order) {
    const auto bg = std::span<const double>(blocks.row(static_cast<Eigen::Index>(g)).data(), static_cast<std::size_t>(k));
    double running = 0.0;  // the f = g term
    bool lost = false;
    auto beaten = [&](double v) { return v > best.value || (v == best.value && g > best.index); };
    if (beaten(running)) continue;
    for (const std::size_t f : order) {
      if (f == g) continue;
      const double v = mom::mom_of_difference(
          bg, std::span<const double>(blocks.row(static_cast<Eigen::Index>(f)).data(), static_cast<std::size_t>(k)),
          scratch);
      running = std::max(running, v);
      if (beaten(running)) {
        lost = true;
        break;
      }
    }
    if (!lost) best = {g, running};
  }
  return best;
}

Predictor minmax_select(const std::vector<Predictor>& candidates, const LabeledSample& s3, int k) {
  require(!candidates.empty(), "minmax_select: no candidates");
  return candidates[minmax_select(PredictionCache(candidates, s3), k).index];
}

// ---------------------------------------------------------------------------

namespace {

// Filter on s2, form midpoints, select on s3.
Predictor tournament(const std::vector<Predictor>& elements, const LabeledSample& s2, const LabeledSample& s3, int k,
                     double alpha, Diagnostics& diag) {
  const auto kept = filter(PredictionCache(elements, s2), k, alpha);
  diag.survivors = kept.survivors.size();
  diag.filter_fallback = kept.fallback;
  std::vector<Predictor> survivors;
  for (const auto idx : kept.survivors) survivors.push_back(elements[idx]);

  const auto pairs = midpoint_pairs(survivors.size());
  diag.candidates = pairs.size();
  const auto on_s3 = PredictionCache::midpoints_of(PredictionCache(survivors, s3), pairs);
  const auto chosen = minmax_select(on_s3, k);
  const auto [a, b] = pairs[chosen.index];
  return make_midpoint(survivors[a], survivors[b]);
}

}  // namespace

Fit fit_aggregator(const LabeledSample& s, const AggregatorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(s.size() >= 3, "fit_aggregator: need at least 3 samples");
  const Eigen::Index n = s.size() / 3;
  const Eigen::Index d = s.dim();
  Fit fit{ZeroPredictor{d}, {}};
  auto& diag = fit.diagnostics;
  diag.split_size = n;
  diag.eps = cover::resolve_eps(cfg, n, d);

  int cap = cfg.net_cap.value_or(cover::default_net_cap(n, d));
  if (!cfg.k) {
    const int feasible = feasible_net_size(n, cfg.delta);
    if (feasible == 0) {
      diag.zero_fallback = true;
      diag.k = class_blocks(1.0, cfg.delta / 3.0);
      return fit;
    }
    cap = std::min(cap, feasible);
  }
  diag.net_cap = cap;

  const auto s1 = s.slice(0, n);
  const auto s2 = s.slice(n, n);
  const auto s3 = s.slice(2 * n, n);
  const auto pool = cover::build_candidate_pool(s1, cfg, seed);
  const auto net = cover::build_net(pool, diag.eps, cap, s1);
  diag.pool_size = static_cast<int>(pool.size());
  diag.net_size = static_cast<int>(net.members.size());
  diag.net_truncated = net.truncated;

  const auto constants = default_constants(net.members.size(), n, d, cfg.m, cfg.delta);
  diag.k = cfg.k.value_or(constants.k);
  diag.alpha = cfg.alpha.value_or(constants.alpha);
  if (diag.k > n) {
    diag.zero_fallback = true;
    return fit;
  }

  std::vector<Predictor> elements(net.members.begin(), net.members.end());
  fit.predictor = tournament(elements, s2, s3, diag.k, diag.alpha, diag);
  return fit;
}

Fit fit_finite_dictionary(const LabeledSample& s, const std::vector<Predictor>& dict, double m, double delta) {
  require(!dict.empty(), "fit_finite_dictionary: empty dictionary");
  require(m > 0.0, "fit_finite_dictionary: m must be positive");
  require(delta > 0.0 && delta < 1.0, "fit_finite_dictionary: delta must lie in (0, 1)");
  require(s.size() >= 2, "fit_finite_dictionary: need at least 2 samples");
  const Eigen::Index n = s.size() / 2;
  Fit fit{ZeroPredictor{s.dim()}, {}};
  auto& diag = fit.diagnostics;
  diag.split_size = n;
  diag.net_size = static_cast<int>(dict.size());

  // Two high-probability events (filter and selection), each at delta / 2.
  const auto size = static_cast<double>(dict.size());
  diag.k = class_blocks(size * size, delta / 2.0);
  diag.alpha = class_alpha(size * size, delta / 2.0, n, m);
  if (diag.k > n) {
    diag.zero_fallback = true;
    return fit;
  }
  std::vector<Predictor> bounded;
  bounded.reserve(dict.size());
  for (const auto& f : dict) bounded.emplace_back(Truncated{share(f), m});
  fit.predictor = tournament(bounded, s.slice(0, n), s.slice(n, n), diag.k, diag.alpha, diag);
  return fit;
}

}  // namespace dfreg::aggregator
