#pragma once

#include "sensilab/map_spec.hpp"
#include "sensilab/metrics.hpp"
#include "sensilab/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sensilab {

struct EstimatorOptions {
  /// Put 0, 1/2, 1/3 and the map's fixed points ahead of the sampled centers.
  bool adversarial_centers = true;
  Parallelism par;
};

struct CenterFraction {
  ExactPoint center;
  MeasureEstimate fraction;
};

/// Pairs that separate in both halves [0, N/2) and [N/2, N] of the horizon,
/// a finite stand-in for the limsup form of the definition.
struct LimsupCheck {
  std::uint64_t pairs = 0;
  std::uint64_t both_windows = 0;
  [[nodiscard]] double fraction() const {
    return pairs ? static_cast<double>(both_windows) / static_cast<double>(pairs) : 0.0;
  }
};

struct SensitivityReport {
  enum class Kind { WMeasurable, Pairwise };
  Kind kind = Kind::WMeasurable;
  MapSpec map;
  MetricSpec metric = MetricSpec::euclidean();
  double delta = 0.0;
  std::uint64_t horizon = 0;
  MeasureEstimate separation;
  std::vector<CenterFraction> per_center_fractions;
  std::vector<MeasureEstimate> trapped_measures;  // per center, complement of the separation count
  std::uint64_t pairs_sampled = 0;
  std::optional<LimsupCheck> limsup;
};

namespace detail {

inline void require_base(const MetricSpec& metric, const char* who) {
  if (metric.is_derived())
    throw std::invalid_argument(std::string(who) + ": needs a base metric, the horizon is already explicit");
}

inline void require_positive_delta(double delta, const char* who) {
  if (!(delta > 0.0)) throw std::invalid_argument(std::string(who) + ": delta must be positive");
}

}  // namespace detail

/// Stream of the y samples paired with center i; y_j comes from child(j).
/// trapped_set_measure on this stream sees exactly the same y's.
inline SeedStream center_ys_stream(const SeedStream& rng, std::uint64_t i) { return rng.child(i).child(1); }

/// Centers for the per-x estimators: the adversarial points 0, 1/2, 1/3 and the
/// map's fixed points first, then uniform samples from rng.child(i).child(0).
inline std::vector<ExactPoint> estimator_centers(const MapSpec& map, unsigned bits, std::uint64_t count,
                                                 const SeedStream& rng, bool adversarial_centers = true) {
  std::vector<ExactPoint> adversarial{ExactPoint::from_rational(0, 1, bits), ExactPoint::from_rational(1, 2, bits),
                                      ExactPoint::from_rational(1, 3, bits)};
  if (!adversarial_centers) adversarial.clear();
  for (auto& p : adversarial_centers ? fixed_points(map, bits) : std::vector<ExactPoint>{})
    if (std::find(adversarial.begin(), adversarial.end(), p) == adversarial.end()) adversarial.push_back(p);
  std::vector<ExactPoint> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i)
    out.push_back(i < adversarial.size() ? adversarial[i] : sample_point(rng.child(i).child(0), bits));
  return out;
}

/// Least n <= N with d(T^n x, T^n y) > delta.
inline std::optional<std::uint64_t> separation_time(const MapSpec& map, const MetricSpec& metric, ExactPoint x,
                                                    ExactPoint y, double delta, std::uint64_t horizon) {
  detail::require_base(metric, "separation_time");
  detail::require_positive_delta(delta, "separation_time");
  check_precision(map, x, horizon);
  check_precision(map, y, horizon);
  for (std::uint64_t n = 0;; ++n) {
    if (base_distance(metric.base(), x, y) > delta) return n;
    if (n == horizon) return std::nullopt;
    x = iterate(map, x);
    y = iterate(map, y);
  }
}

namespace detail {

/// Per-center orbit sup distances on the shared (center i, y j) sample layout.
/// Walks stop once the running sup exceeds `cap`.
struct CenterSample {
  std::vector<ExactPoint> centers;
  std::vector<std::vector<double>> sups;  // [center][y]
};

inline CenterSample sample_center_sups(const MapSpec& map, const MetricSpec& metric, std::uint64_t centers,
                                       std::uint64_t ys_per_center, std::uint64_t horizon, const SeedStream& rng,
                                       double cap, const EstimatorOptions& opts) {
  if (centers < 1 || ys_per_center < 1) throw std::invalid_argument("sensitivity estimate: empty sample budget");
  const unsigned bits = map.required_precision(horizon);
  CenterSample out{estimator_centers(map, bits, centers, rng, opts.adversarial_centers), {}};
  out.sups.assign(centers, std::vector<double>(ys_per_center));
  parallel_for(centers * ys_per_center, opts.par, [&](std::size_t k) {
    std::size_t i = k / ys_per_center, j = k % ys_per_center;
    ExactPoint y = sample_point(center_ys_stream(rng, i).child(j), bits);
    out.sups[i][j] = orbit_sup_distance(metric.base(), map, out.centers[i], y, horizon, cap);
  });
  return out;
}

inline LimsupCheck limsup_spot_check(const MapSpec& map, const MetricSpec& metric, const std::vector<ExactPoint>& centers,
                                     std::uint64_t ys, double delta, std::uint64_t horizon, const SeedStream& rng) {
  const unsigned bits = map.required_precision(horizon);
  const std::uint64_t half = horizon / 2;
  LimsupCheck check;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::uint64_t j = 0; j < ys; ++j) {
      ExactPoint x = centers[i];
      ExactPoint y = sample_point(center_ys_stream(rng, i).child(j), bits);
      bool early = false, late = false;
      for (std::uint64_t n = 0; n <= horizon && !(early && late); ++n) {
        if (base_distance(metric.base(), x, y) > delta) (n < half ? early : late) = true;
        if (n < horizon) {
          x = iterate(map, x);
          y = iterate(map, y);
        }
      }
      ++check.pairs;
      if (early && late) ++check.both_windows;
    }
  }
  return check;
}

inline SensitivityReport w_report_from_sups(const MapSpec& map, const MetricSpec& metric, double delta,
                                            std::uint64_t horizon, const CenterSample& sample) {
  SensitivityReport r;
  r.kind = SensitivityReport::Kind::WMeasurable;
  r.map = map;
  r.metric = metric;
  r.delta = delta;
  r.horizon = horizon;
  std::uint64_t total = 0, separated = 0;
  for (std::size_t i = 0; i < sample.centers.size(); ++i) {
    const auto& sups = sample.sups[i];
    auto hits = static_cast<std::uint64_t>(std::count_if(sups.begin(), sups.end(), [&](double s) { return s > delta; }));
    r.per_center_fractions.push_back({sample.centers[i], MeasureEstimate::monte_carlo(hits, sups.size())});
    r.trapped_measures.push_back(MeasureEstimate::monte_carlo(sups.size() - hits, sups.size()));
    total += sups.size();
    separated += hits;
  }
  r.separation = MeasureEstimate::monte_carlo(separated, total);
  r.pairs_sampled = total;
  return r;
}

}  // namespace detail

/// Fraction of sampled y that separate from each center by more than delta
/// within the horizon (the one-hit form of W-measurable sensitivity).
inline SensitivityReport w_sensitivity_estimate(const MapSpec& map, const MetricSpec& metric, double delta,
                                                std::uint64_t centers, std::uint64_t ys_per_center,
                                                std::uint64_t horizon, const SeedStream& rng,
                                                const EstimatorOptions& opts = {}) {
  detail::require_base(metric, "w_sensitivity_estimate");
  detail::require_positive_delta(delta, "w_sensitivity_estimate");
  if (horizon < 1) throw std::invalid_argument("w_sensitivity_estimate: horizon must be >= 1");
  auto sample = detail::sample_center_sups(map, metric, centers, ys_per_center, horizon, rng, delta, opts);
  auto report = detail::w_report_from_sups(map, metric, delta, horizon, sample);
  report.limsup = detail::limsup_spot_check(map, metric, sample.centers, std::min<std::uint64_t>(ys_per_center, 10),
                                            delta, horizon, rng);
  return report;
}

/// mu{y : d(T^n x, T^n y) < delta for all n <= N}, sampled with y_j from rng.child(j).
inline MeasureEstimate trapped_set_measure(const MapSpec& map, const MetricSpec& metric, const ExactPoint& x,
                                           double delta, std::uint64_t horizon, const SeedStream& rng,
                                           std::uint64_t samples, Parallelism par = {}) {
  detail::require_base(metric, "trapped_set_measure");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("trapped_set_measure: delta must be in (0, 1]");
  if (samples < 100) throw std::invalid_argument("trapped_set_measure: need at least 100 samples");
  check_precision(map, x, horizon);
  const unsigned bits = std::max(map.required_precision(horizon), x.precision_bits());
  std::vector<char> trapped(samples);
  parallel_for(samples, par, [&](std::size_t j) {
    ExactPoint a = x, b = sample_point(rng.child(j), bits);
    bool stays = true;
    for (std::uint64_t n = 0; stays; ++n) {
      stays = base_distance(metric.base(), a, b) < delta;
      if (n == horizon) break;
      a = iterate(map, a);
      b = iterate(map, b);
    }
    trapped[j] = stays;
  });
  return MeasureEstimate::monte_carlo(static_cast<std::uint64_t>(std::count(trapped.begin(), trapped.end(), 1)), samples);
}

/// Fraction of independent pairs (x, y) with d(T^n x, T^n y) >= delta for some n <= N.
inline SensitivityReport pairwise_sensitivity_estimate(const MapSpec& map, const MetricSpec& metric, double delta,
                                                       std::uint64_t pairs, std::uint64_t horizon,
                                                       const SeedStream& rng, Parallelism par = {}) {
  detail::require_base(metric, "pairwise_sensitivity_estimate");
  detail::require_positive_delta(delta, "pairwise_sensitivity_estimate");
  if (pairs < 1) throw std::invalid_argument("pairwise_sensitivity_estimate: pairs must be >= 1");
  const unsigned bits = map.required_precision(horizon);
  // sup > below(delta) is sup >= delta
  const double below = std::nextafter(delta, -std::numeric_limits<double>::infinity());
  std::vector<char> hit(pairs);
  parallel_for(pairs, par, [&](std::size_t k) {
    auto s = rng.child(k);
    hit[k] = orbit_sup_distance(metric.base(), map, sample_point(s.child(0), bits), sample_point(s.child(1), bits),
                                horizon, below) >= delta;
  });
  SensitivityReport r;
  r.kind = SensitivityReport::Kind::Pairwise;
  r.map = map;
  r.metric = metric;
  r.delta = delta;
  r.horizon = horizon;
  r.separation = MeasureEstimate::monte_carlo(static_cast<std::uint64_t>(std::count(hit.begin(), hit.end(), 1)), pairs);
  r.pairs_sampled = pairs;
  return r;
}

struct EquivalenceReport {
  SensitivityReport pairwise;
  SensitivityReport w;
  double gap = 0.0;
  double threshold = 0.0;  // sum of the two 3-sigma half-widths
  [[nodiscard]] bool consistent() const { return gap <= threshold; }
};

/// Runs the pairwise and the per-center estimators on matched budgets and
/// reports how far apart they land.
inline EquivalenceReport equivalence_check(const MapSpec& map, const MetricSpec& metric, double delta,
                                           std::uint64_t budget, std::uint64_t horizon, const SeedStream& rng,
                                           const EstimatorOptions& opts = {}) {
  if (budget < 1) throw std::invalid_argument("equivalence_check: budget must be >= 1");
  const std::uint64_t centers = std::min<std::uint64_t>(20, budget);
  const std::uint64_t ys = budget / centers;
  EquivalenceReport r{pairwise_sensitivity_estimate(map, metric, delta, centers * ys, horizon, rng.child(1), opts.par),
                      w_sensitivity_estimate(map, metric, delta, centers, ys, horizon, rng.child(0), opts), 0.0, 0.0};
  r.gap = std::abs(r.pairwise.separation.value - r.w.separation.value);
  r.threshold = r.pairwise.separation.half_width + r.w.separation.half_width;
  return r;
}

struct ConstantSearchReport {
  std::vector<double> grid;
  std::vector<MeasureEstimate> fractions;  // separation fraction per grid delta
  double threshold = 0.0;
  std::optional<double> delta;             // largest qualifying grid delta
  bool monotonicity_violation = false;
  std::vector<ExactPoint> centers;
  std::uint64_t horizon = 0;
};

/// Largest grid delta whose W-separation fraction reaches `threshold`. All grid
/// points share one sample, so each fraction equals w_sensitivity_estimate at
/// that delta with the same stream.
inline ConstantSearchReport sensitivity_constant_search(const MapSpec& map, const MetricSpec& metric,
                                                        const std::vector<double>& grid, double threshold,
                                                        std::uint64_t centers, std::uint64_t ys_per_center,
                                                        std::uint64_t horizon, const SeedStream& rng,
                                                        const EstimatorOptions& opts = {}) {
  detail::require_base(metric, "sensitivity_constant_search");
  if (grid.empty()) throw std::invalid_argument("sensitivity_constant_search: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()) || !(grid.front() > 0.0))
    throw std::invalid_argument("sensitivity_constant_search: grid must be positive and ascending");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("sensitivity_constant_search: threshold must be in (0, 1]");
  auto sample = detail::sample_center_sups(map, metric, centers, ys_per_center, horizon, rng, grid.back(), opts);
  ConstantSearchReport r{grid, {}, threshold, std::nullopt, false, sample.centers, horizon};
  for (double d : grid) r.fractions.push_back(detail::w_report_from_sups(map, metric, d, horizon, sample).separation);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (r.fractions[i].value >= threshold) r.delta = grid[i];
  // a qualifying delta above a failing one is only noise if within combined 3 sigma
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j)
      if (r.fractions[i].value < threshold && r.fractions[j].value >= threshold &&
          r.fractions[j].value - r.fractions[i].value > r.fractions[i].half_width + r.fractions[j].half_width)
        r.monotonicity_violation = true;
  return r;
}

}  // namespace sensilab
