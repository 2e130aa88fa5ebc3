#pragma once

#include "sensilab/map_spec.hpp"
#include "sensilab/metrics.hpp"
#include "sensilab/random.hpp"
#include "sensilab/sensitivity.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <vector>

namespace sensilab {

struct UniformityReport {
  MetricSpec metric;
  double radius = 0.0;
  std::vector<CenterFraction> estimates;  // (center, ball measure)
  double max_spread = 0.0;
  double tolerance = 0.0;                  // combined 3 sigma of the two extreme estimates
  double lipschitz_defect = 0.0;
  bool lipschitz_warning = false;          // metric failed the 1-Lipschitz pre-check
  [[nodiscard]] bool within_tolerance() const { return max_spread <= tolerance; }
};

/// Ball measures of one radius at the given centers, and how far apart they are.
/// For an ergodic measure-preserving map and a 1-Lipschitz compatible metric
/// they must all coincide; the metric is pre-checked and flagged, not rejected.
inline UniformityReport ball_uniformity_check(const MapSpec& map, const MetricSpec& metric, double radius,
                                              const std::vector<ExactPoint>& centers, std::uint64_t samples,
                                              const SeedStream& rng, Parallelism par = {}) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_uniformity_check: radius must be positive");
  if (centers.empty()) throw std::invalid_argument("ball_uniformity_check: no centers");
  UniformityReport r{metric, radius, {}, 0.0, 0.0, 0.0, false};
  try {
    auto lip = lipschitz_defect(metric, map, rng.child(~0ULL), 200, par);
    r.lipschitz_defect = lip.max_defect;
    r.lipschitz_warning = lip.max_defect > 0.0;
  } catch (const MapMismatch&) {
    r.lipschitz_warning = true;
  }
  for (std::size_t i = 0; i < centers.size(); ++i)
    r.estimates.push_back({centers[i], ball_measure(metric, centers[i], radius, rng.child(i).child(1), samples, par)});
  auto [lo, hi] = std::minmax_element(r.estimates.begin(), r.estimates.end(), [](const auto& a, const auto& b) {
    return a.fraction.value < b.fraction.value;
  });
  r.max_spread = hi->fraction.value - lo->fraction.value;
  r.tolerance = hi->fraction.half_width + lo->fraction.half_width;
  return r;
}

/// Same, at `centers` uniformly sampled centers.
inline UniformityReport ball_uniformity_check(const MapSpec& map, const MetricSpec& metric, double radius,
                                              std::uint64_t centers, std::uint64_t samples, const SeedStream& rng,
                                              Parallelism par = {}) {
  const unsigned bits = metric.sample_precision();
  std::vector<ExactPoint> cs;
  for (std::uint64_t i = 0; i < centers; ++i) cs.push_back(sample_point(rng.child(i).child(0), bits));
  return ball_uniformity_check(map, metric, radius, cs, samples, rng, par);
}

struct ClassifyConfig {
  std::vector<double> delta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double threshold = 0.99;
  std::uint64_t horizon = 200;
  std::uint64_t centers = 20;
  std::uint64_t ys_per_center = 500;
  std::uint64_t trapped_samples = 2000;
  std::uint64_t isometry_pairs = 2000;
  double isometry_tolerance = 0x1p-40;
  double uniformity_radius = 0.1;
  std::uint64_t uniformity_centers = 10;
  std::uint64_t uniformity_samples = 4000;
  bool adversarial_centers = true;
};

struct Verdict {
  enum class Label { Sensitive, IsometryLike, Inconclusive };
  Label label = Label::Inconclusive;
  std::optional<double> delta;            // Sensitive
  std::optional<double> isometry_defect;  // measured on the derived metric
  double ball_uniformity_spread = 0.0;
  bool contradiction = false;
  std::string failing;                    // sub-report that blocked a verdict
  std::vector<std::string> warnings;
  std::vector<std::string> hypotheses;

  // evidence
  std::optional<ConstantSearchReport> search;
  std::vector<CenterFraction> trapped;  // per tested center at the reported delta
  std::optional<DefectReport> isometry;
  std::optional<UniformityReport> uniformity;

  // config echo
  MapSpec map;
  MetricSpec metric = MetricSpec::euclidean();
  ClassifyConfig config;
  std::uint64_t seed = 0;
};

inline const char* to_string(Verdict::Label l) {
  switch (l) {
    case Verdict::Label::Sensitive: return "Sensitive";
    case Verdict::Label::IsometryLike: return "IsometryLike";
    case Verdict::Label::Inconclusive: return "Inconclusive";
  }
  return "?";
}

/// Sensitive-or-isometric classification of one system and metric.
///
/// Order: sensitivity constant search; if a delta qualifies, every tested
/// center's trapped set must be statistically null. Otherwise the derived
/// metric must act isometrically and have uniform ball measures. The isometry
/// defect is measured in both branches so that a run satisfying both bundles
/// is reported as a contradiction. IsometryLike only names a Kronecker
/// candidate for this presentation of the system, it is not a conjugacy.
inline Verdict dichotomy_classify(const MapSpec& map, const MetricSpec& metric, const ClassifyConfig& config,
                                  const SeedStream& rng, Parallelism par = {}) {
  Verdict v;
  v.map = map;
  v.metric = metric;
  v.config = config;
  v.seed = rng.seed();
  v.hypotheses = {"measure-preserving: holds for all shipped maps",
                  "forward measurable: holds for all shipped maps (finitely many monotone branches); unchecked for "
                  "anything else",
                  "ergodic: assumed, not certified"};
  if (map.is<Identity>())
    v.warnings.push_back("identity is not ergodic; the dichotomy's hypotheses do not hold for it");

  try {
    if (metric.is_derived()) {
      v.failing = "config: classification needs a base metric";
      return v;
    }
    EstimatorOptions opts{config.adversarial_centers, par};
    v.search = sensitivity_constant_search(map, metric, config.delta_grid, config.threshold, config.centers,
                                           config.ys_per_center, config.horizon, rng.child(0), opts);
    const MetricSpec derived = MetricSpec::derived(metric, map, config.horizon);
    v.isometry = isometry_defect(derived, map, rng.child(1), config.isometry_pairs, par);
    v.isometry_defect = v.isometry->max_defect;
    const bool isometric = v.isometry->max_defect <= config.isometry_tolerance;

    if (v.search->delta) {
      const double delta = *v.search->delta;
      bool all_null = true;
      for (std::size_t i = 0; i < v.search->centers.size(); ++i) {
        auto est = trapped_set_measure(map, metric, v.search->centers[i], std::min(delta, 1.0), config.horizon,
                                       rng.child(2).child(i), config.trapped_samples, par);
        all_null = all_null && est.statistically_zero();
        v.trapped.push_back({v.search->centers[i], est});
      }
      if (isometric) {
        v.contradiction = true;
        v.failing = "contradiction: a sensitivity constant qualified and the derived metric is isometric";
      } else if (!all_null) {
        v.failing = "trapped-set: a tested center has a trapped set of positive measure";
      } else {
        v.label = Verdict::Label::Sensitive;
        v.delta = delta;
      }
      return v;
    }

    v.uniformity = ball_uniformity_check(map, derived, config.uniformity_radius, config.uniformity_centers,
                                         config.uniformity_samples, rng.child(3), par);
    v.ball_uniformity_spread = v.uniformity->max_spread;
    if (!isometric)
      v.failing = "isometry: derived metric is not preserved by the map";
    else if (!v.uniformity->within_tolerance())
      v.failing = "ball-uniformity: derived-metric balls differ in measure beyond 3 sigma";
    else
      v.label = Verdict::Label::IsometryLike;
  } catch (const std::exception& e) {
    v.label = Verdict::Label::Inconclusive;
    v.failing = std::string("error: ") + e.what();
  }
  return v;
}

}  // namespace sensilab
