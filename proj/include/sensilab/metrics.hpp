#pragma once

#include "sensilab/exact_point.hpp"
#include "sensilab/map_spec.hpp"
#include "sensilab/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sensilab {

/// Slack allowed on the triangle inequality, checked on 50-digit distances.
inline constexpr double kTriangleSlack = 0x1p-60;

class MapMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BaseMetric {
  enum class Kind { Euclidean, Circle, Power };
  Kind kind = Kind::Euclidean;
  double exponent = 1.0;  // Power only, in (0, 1]

  friend bool operator==(const BaseMetric&, const BaseMetric&) = default;
};

struct DerivedPart {
  MapSpec map;
  std::uint64_t horizon = 0;
  friend bool operator==(const DerivedPart&, const DerivedPart&) = default;
};

/// A base metric on [0,1), optionally lifted to the finite-horizon orbit metric
/// min(max_{0<=n<=N} d(T^n x, T^n y), 1).
///
/// The derived part wraps a base metric only, so a derived-of-derived metric
/// cannot be built; the parser rejects that text form as well.
class MetricSpec {
 public:
  static MetricSpec euclidean() { return MetricSpec(BaseMetric{BaseMetric::Kind::Euclidean, 1.0}); }
  static MetricSpec circle() { return MetricSpec(BaseMetric{BaseMetric::Kind::Circle, 1.0}); }
  static MetricSpec power(double s) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("power metric needs exponent in (0, 1]");
    return MetricSpec(BaseMetric{BaseMetric::Kind::Power, s});
  }
  static MetricSpec derived(const MetricSpec& base, MapSpec map, std::uint64_t horizon) {
    if (base.is_derived()) throw std::invalid_argument("derived metric of a derived metric is not supported");
    MetricSpec m = base;
    m.derived_ = DerivedPart{std::move(map), horizon};
    return m;
  }

  [[nodiscard]] const BaseMetric& base() const noexcept { return base_; }
  [[nodiscard]] MetricSpec base_spec() const { return MetricSpec(base_); }
  [[nodiscard]] bool is_derived() const noexcept { return derived_.has_value(); }
  [[nodiscard]] const DerivedPart& derived_part() const { return derived_.value(); }

  /// Same derived metric at a different horizon.
  [[nodiscard]] MetricSpec with_horizon(std::uint64_t horizon) const {
    MetricSpec m = *this;
    m.derived_.value().horizon = horizon;
    return m;
  }

  /// Bits a sampled point needs so that this metric, evaluated after `extra_steps`
  /// applications of `map`, stays exact.
  [[nodiscard]] unsigned sample_precision(const MapSpec* map = nullptr, std::uint64_t extra_steps = 0) const {
    unsigned bits = kGuardBits;
    if (derived_) bits = std::max(bits, derived_->map.required_precision(derived_->horizon + extra_steps));
    if (map) bits = std::max(bits, map->required_precision(extra_steps));
    return bits;
  }

  [[nodiscard]] std::string to_string() const {
    std::string b;
    switch (base_.kind) {
      case BaseMetric::Kind::Euclidean: b = "euclidean"; break;
      case BaseMetric::Kind::Circle: b = "circle"; break;
      case BaseMetric::Kind::Power: {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, base_.exponent);
        b = "power:" + std::string(buf, res.ptr);
        break;
      }
    }
    if (!derived_) return b;
    return "derived(" + b + "; " + derived_->map.to_string() + "; N=" + std::to_string(derived_->horizon) + ")";
  }

  static MetricSpec parse(std::string_view text);

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;

 private:
  explicit MetricSpec(BaseMetric b) : base_(b) {}
  BaseMetric base_;
  std::optional<DerivedPart> derived_;
};

namespace detail {
inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}
}  // namespace detail

inline MetricSpec MetricSpec::parse(std::string_view text) {
  text = detail::trim(text);
  auto fail = [&](const std::string& why) { return SpecParseError("bad metric '" + std::string(text) + "': " + why); };
  if (text == "euclidean") return euclidean();
  if (text == "circle") return circle();
  if (text.starts_with("power:")) {
    auto num = text.substr(6);
    double s = 0;
    auto res = std::from_chars(num.data(), num.data() + num.size(), s);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) throw fail("expected power:<real>");
    if (!(s > 0.0 && s <= 1.0)) throw fail("exponent must be in (0, 1]");
    return power(s);
  }
  if (text.starts_with("derived(")) {
    if (!text.ends_with(")")) throw fail("missing closing parenthesis");
    auto body = text.substr(8, text.size() - 9);
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i == body.size() || body[i] == ';') {
        parts.push_back(detail::trim(body.substr(start, i - start)));
        start = i + 1;
      }
    }
    if (parts.size() != 3) throw fail("expected derived(<base>; <map>; N=<horizon>)");
    if (parts[0].starts_with("derived")) throw fail("derived metric of a derived metric is not supported");
    MetricSpec base = parse(parts[0]);
    MapSpec map = MapSpec::parse(parts[1]);
    auto h = parts[2];
    if (!h.starts_with("N=")) throw fail("expected N=<horizon>");
    h.remove_prefix(2);
    std::uint64_t horizon = 0;
    auto res = std::from_chars(h.data(), h.data() + h.size(), horizon);
    if (res.ec != std::errc() || res.ptr != h.data() + h.size()) throw fail("bad horizon");
    return derived(base, std::move(map), horizon);
  }
  throw fail("unknown metric kind (expected euclidean, circle, power:<s>, derived(...))");
}

inline double base_distance(const BaseMetric& m, const ExactPoint& x, const ExactPoint& y) {
  switch (m.kind) {
    case BaseMetric::Kind::Euclidean: return euclidean_gap(x, y);
    case BaseMetric::Kind::Circle: return circle_gap(x, y);
    case BaseMetric::Kind::Power: return std::pow(euclidean_gap(x, y), m.exponent);
  }
  return 0.0;
}

/// max_{0<=n<=horizon} d(T^n x, T^n y), stopping early once the running max
/// strictly exceeds `stop_above`. Without an early stop the result is exact.
inline double orbit_sup_distance(const BaseMetric& base, const MapSpec& map, ExactPoint x, ExactPoint y,
                                 std::uint64_t horizon,
                                 double stop_above = std::numeric_limits<double>::infinity()) {
  double best = base_distance(base, x, y);
  for (std::uint64_t n = 1; n <= horizon && !(best > stop_above); ++n) {
    x = iterate(map, x);
    y = iterate(map, y);
    best = std::max(best, base_distance(base, x, y));
  }
  return best;
}

inline double distance(const MetricSpec& metric, const ExactPoint& x, const ExactPoint& y) {
  if (!metric.is_derived()) return base_distance(metric.base(), x, y);
  const auto& d = metric.derived_part();
  check_precision(d.map, x, d.horizon);
  check_precision(d.map, y, d.horizon);
  return std::min(orbit_sup_distance(metric.base(), d.map, x, y, d.horizon), 1.0);
}

/// Whether distance(metric, x, y) < radius; exits the orbit walk early.
inline bool in_open_ball(const MetricSpec& metric, const ExactPoint& center, const ExactPoint& y, double radius) {
  if (!metric.is_derived()) return base_distance(metric.base(), center, y) < radius;
  const auto& d = metric.derived_part();
  check_precision(d.map, center, d.horizon);
  check_precision(d.map, y, d.horizon);
  return std::min(orbit_sup_distance(metric.base(), d.map, center, y, d.horizon, radius), 1.0) < radius;
}

// ---------------------------------------------------------------------------
// Metric axioms

namespace detail {
inline WideFloat wide_base_distance(const BaseMetric& m, const ExactPoint& x, const ExactPoint& y) {
  switch (m.kind) {
    case BaseMetric::Kind::Euclidean: return euclidean_gap_wide(x, y);
    case BaseMetric::Kind::Circle: return circle_gap_wide(x, y);
    case BaseMetric::Kind::Power: {
      WideFloat g = euclidean_gap_wide(x, y);
      return g == 0 ? g : WideFloat(pow(g, WideFloat(m.exponent)));
    }
  }
  return 0;
}

inline WideFloat wide_distance(const MetricSpec& metric, ExactPoint x, ExactPoint y) {
  WideFloat best = wide_base_distance(metric.base(), x, y);
  if (!metric.is_derived()) return best;
  const auto& d = metric.derived_part();
  check_precision(d.map, x, d.horizon);
  check_precision(d.map, y, d.horizon);
  for (std::uint64_t n = 1; n <= d.horizon; ++n) {
    x = iterate(d.map, x);
    y = iterate(d.map, y);
    best = std::max(best, wide_base_distance(metric.base(), x, y));
  }
  return std::min(best, WideFloat(1));
}
}  // namespace detail

struct AxiomViolation {
  enum class Kind { Symmetry, Identity, Triangle };
  Kind kind;
  ExactPoint x, y, z;
  double defect = 0.0;
};

inline const char* to_string(AxiomViolation::Kind k) {
  switch (k) {
    case AxiomViolation::Kind::Symmetry: return "symmetry";
    case AxiomViolation::Kind::Identity: return "identity";
    case AxiomViolation::Kind::Triangle: return "triangle";
  }
  return "?";
}

struct AxiomReport {
  MetricSpec metric;
  std::uint64_t trials = 0;
  std::vector<AxiomViolation> violations;
};

/// Samples `trials` triples and checks symmetry, identity of indiscernibles
/// (d(x,x) = 0, and d > 0 both for the sampled pair and for x against its grid
/// neighbour), and all three orientations of the triangle inequality.
inline AxiomReport verify_metric_axioms(const MetricSpec& metric, const SeedStream& rng, std::uint64_t trials,
                                        Parallelism par = {}) {
  if (trials < 1) throw std::invalid_argument("verify_metric_axioms: trials must be >= 1");
  const unsigned bits = metric.sample_precision();
  std::vector<std::vector<AxiomViolation>> found(trials);
  parallel_for(trials, par, [&](std::size_t i) {
    auto s = rng.child(i);
    ExactPoint x = sample_point(s.child(0), bits), y = sample_point(s.child(1), bits), z = sample_point(s.child(2), bits);
    auto& out = found[i];
    double xy = distance(metric, x, y), yx = distance(metric, y, x);
    WideFloat wxy = detail::wide_distance(metric, x, y), wyz = detail::wide_distance(metric, y, z),
              wxz = detail::wide_distance(metric, x, z);
    if (xy != yx) out.push_back({AxiomViolation::Kind::Symmetry, x, y, z, std::abs(xy - yx)});
    if (double xx = distance(metric, x, x); xx != 0.0) out.push_back({AxiomViolation::Kind::Identity, x, x, x, xx});
    if (x != y && xy <= 0.0) out.push_back({AxiomViolation::Kind::Identity, x, y, y, 0.0});
    ExactPoint next = x.plus(ExactPoint(BigInt(1), bits));
    if (distance(metric, x, next) <= 0.0) out.push_back({AxiomViolation::Kind::Identity, x, next, next, 0.0});
    auto triangle = [&](const WideFloat& lhs, const WideFloat& a, const WideFloat& b, const ExactPoint& p,
                        const ExactPoint& q, const ExactPoint& r) {
      WideFloat excess = lhs - (a + b);
      if (excess > kTriangleSlack)
        out.push_back({AxiomViolation::Kind::Triangle, p, q, r, static_cast<double>(excess)});
    };
    triangle(wxz, wxy, wyz, x, y, z);
    triangle(wxy, wxz, wyz, x, z, y);
    triangle(wyz, wxy, wxz, y, x, z);
  });
  AxiomReport report{metric, trials, {}};
  for (auto& v : found) report.violations.insert(report.violations.end(), v.begin(), v.end());
  return report;
}

// ---------------------------------------------------------------------------
// Lipschitz and isometry defects

struct DefectReport {
  double max_defect = -std::numeric_limits<double>::infinity();
  ExactPoint witness_x, witness_y;
  std::uint64_t pairs = 0;
};

namespace detail {
template <typename DefectFn>
DefectReport max_defect_over_pairs(const SeedStream& rng, std::uint64_t pairs, unsigned bits, Parallelism par,
                                   DefectFn&& defect_of) {
  if (pairs < 1) throw std::invalid_argument("defect estimate: pairs must be >= 1");
  std::vector<double> defects(pairs);
  parallel_for(pairs, par, [&](std::size_t i) {
    auto s = rng.child(i);
    defects[i] = defect_of(sample_point(s.child(0), bits), sample_point(s.child(1), bits));
  });
  auto it = std::max_element(defects.begin(), defects.end());
  auto at = static_cast<std::uint64_t>(it - defects.begin());
  auto s = rng.child(at);
  return {*it, sample_point(s.child(0), bits), sample_point(s.child(1), bits), pairs};
}
}  // namespace detail

/// Largest sampled d(Tx,Ty) - d(x,y). For a derived metric the image pair is
/// measured at horizon N and the source pair at N+1, where the inequality is
/// exact by construction.
inline DefectReport lipschitz_defect(const MetricSpec& metric, const MapSpec& map, const SeedStream& rng,
                                     std::uint64_t pairs, Parallelism par = {}) {
  if (metric.is_derived() && !(metric.derived_part().map == map))
    throw MapMismatch("lipschitz_defect: metric is derived from " + metric.derived_part().map.to_string() +
                      " but map is " + map.to_string());
  const unsigned bits = metric.sample_precision(&map, 1);
  const MetricSpec source = metric.is_derived() ? metric.with_horizon(metric.derived_part().horizon + 1) : metric;
  return detail::max_defect_over_pairs(rng, pairs, bits, par, [&](const ExactPoint& x, const ExactPoint& y) {
    return distance(metric, iterate(map, x), iterate(map, y)) - distance(source, x, y);
  });
}

/// Largest sampled |d(Tx,Ty) - d(x,y)|, both at the metric's own horizon.
inline DefectReport isometry_defect(const MetricSpec& metric, const MapSpec& map, const SeedStream& rng,
                                    std::uint64_t pairs, Parallelism par = {}) {
  const unsigned bits = metric.sample_precision(&map, 1);
  return detail::max_defect_over_pairs(rng, pairs, bits, par, [&](const ExactPoint& x, const ExactPoint& y) {
    return std::abs(distance(metric, iterate(map, x), iterate(map, y)) - distance(metric, x, y));
  });
}

// ---------------------------------------------------------------------------
// Ball measures

struct MeasureEstimate {
  enum class Method { Analytic, MonteCarlo };
  double value = 0.0;
  double half_width = 0.0;  // 3 sigma
  std::uint64_t samples = 0;
  Method method = Method::Analytic;

  static MeasureEstimate analytic(double v) { return {v, 0.0, 0, Method::Analytic}; }

  /// 3-sigma binomial half-width; an all-miss or all-hit sample reports the
  /// rule-of-three resolution 3/n instead of zero.
  static MeasureEstimate monte_carlo(std::uint64_t hits, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("MeasureEstimate: no samples");
    double v = static_cast<double>(hits) / static_cast<double>(n);
    double hw = (hits == 0 || hits == n) ? 3.0 / static_cast<double>(n)
                                         : 3.0 * std::sqrt(v * (1.0 - v) / static_cast<double>(n));
    return {v, hw, n, Method::MonteCarlo};
  }

  [[nodiscard]] double lower() const { return value - half_width; }
  [[nodiscard]] double upper() const { return value + half_width; }
  /// Estimate cannot be told apart from zero at 3 sigma.
  [[nodiscard]] bool statistically_zero() const { return lower() <= 0.0; }
};

inline const char* to_string(MeasureEstimate::Method m) {
  return m == MeasureEstimate::Method::Analytic ? "analytic" : "monte_carlo";
}

/// mu of the open ball {y : d(center, y) < radius} under Lebesgue measure.
/// Base metrics have closed forms; derived metrics are sampled.
inline MeasureEstimate ball_measure(const MetricSpec& metric, const ExactPoint& center, double radius,
                                    const SeedStream& rng, std::uint64_t samples, Parallelism par = {}) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_measure: radius must be positive");
  if (!metric.is_derived()) {
    const auto& b = metric.base();
    switch (b.kind) {
      case BaseMetric::Kind::Circle: return MeasureEstimate::analytic(std::min(2.0 * radius, 1.0));
      case BaseMetric::Kind::Euclidean:
      case BaseMetric::Kind::Power: {
        double r = b.kind == BaseMetric::Kind::Power ? std::pow(radius, 1.0 / b.exponent) : radius;
        double c = center.to_double();
        return MeasureEstimate::analytic(std::min(1.0, c + r) - std::max(0.0, c - r));
      }
    }
  }
  if (samples < 100) throw std::invalid_argument("ball_measure: Monte Carlo needs at least 100 samples");
  check_precision(metric.derived_part().map, center, metric.derived_part().horizon);
  const unsigned bits = std::max(metric.sample_precision(), center.precision_bits());
  std::vector<char> inside(samples);
  parallel_for(samples, par, [&](std::size_t j) {
    inside[j] = in_open_ball(metric, center, sample_point(rng.child(j), bits), radius);
  });
  auto hits = static_cast<std::uint64_t>(std::count(inside.begin(), inside.end(), 1));
  return MeasureEstimate::monte_carlo(hits, samples);
}

struct ScannedBall {
  ExactPoint center;
  double radius = 0.0;
  MeasureEstimate estimate;
  bool flagged = false;  // indistinguishable from a null set
};

struct ScanReport {
  MetricSpec metric;
  std::vector<ScannedBall> balls;
  MeasureEstimate min_estimate;
  std::vector<ScannedBall> flagged_balls;
  [[nodiscard]] bool empirically_compatible() const { return flagged_balls.empty(); }
};

/// Estimates ball measures at center 0 plus `centers - 1` sampled centers for
/// every radius, flagging balls whose lower 3-sigma bound is not above zero.
inline ScanReport mu_compatibility_scan(const MetricSpec& metric, const std::vector<double>& radii,
                                        const SeedStream& rng, std::uint64_t centers, std::uint64_t samples,
                                        Parallelism par = {}) {
  if (radii.empty()) throw std::invalid_argument("mu_compatibility_scan: empty radius grid");
  for (double r : radii)
    if (!(r > 0.0)) throw std::invalid_argument("mu_compatibility_scan: radii must be positive");
  if (centers < 1) throw std::invalid_argument("mu_compatibility_scan: need at least one center");
  const unsigned bits = metric.sample_precision();
  ScanReport report{metric, {}, {}, {}};
  for (std::uint64_t i = 0; i < centers; ++i) {
    auto s = rng.child(i);
    ExactPoint c = i == 0 ? ExactPoint(BigInt(0), bits) : sample_point(s.child(0), bits);
    for (std::size_t k = 0; k < radii.size(); ++k) {
      auto est = ball_measure(metric, c, radii[k], s.child(1 + k), samples, par);
      report.balls.push_back({c, radii[k], est, !(est.lower() > 0.0)});
    }
  }
  auto lowest = std::min_element(report.balls.begin(), report.balls.end(),
                                 [](const auto& a, const auto& b) { return a.estimate.lower() < b.estimate.lower(); });
  report.min_estimate = lowest->estimate;
  for (const auto& b : report.balls)
    if (b.flagged) report.flagged_balls.push_back(b);
  return report;
}

}  // namespace sensilab
