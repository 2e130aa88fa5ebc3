#pragma once

#include "sensilab/classify.hpp"
#include "sensilab/map_spec.hpp"
#include "sensilab/metrics.hpp"
#include "sensilab/sensitivity.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace sensilab {

using json = nlohmann::json;

inline void to_json(json& j, const ExactPoint& p) { j = json{{"hex", p.to_hex()}, {"value", p.to_double()}}; }

inline void to_json(json& j, const MeasureEstimate& e) {
  j = json{{"value", e.value}, {"half_width", e.half_width}, {"samples", e.samples}, {"method", to_string(e.method)}};
}

inline void to_json(json& j, const CenterFraction& c) { j = json{{"center", c.center}, {"estimate", c.fraction}}; }

inline void to_json(json& j, const AxiomViolation& v) {
  j = json{{"kind", to_string(v.kind)}, {"x", v.x}, {"y", v.y}, {"z", v.z}, {"defect", v.defect}};
}

inline void to_json(json& j, const AxiomReport& r) {
  j = json{{"metric", r.metric.to_string()}, {"trials", r.trials}, {"violations", r.violations}};
}

inline void to_json(json& j, const DefectReport& r) {
  j = json{{"max_defect", r.max_defect}, {"witness", {r.witness_x, r.witness_y}}, {"pairs", r.pairs}};
}

inline void to_json(json& j, const ScannedBall& b) {
  j = json{{"center", b.center}, {"radius", b.radius}, {"estimate", b.estimate}, {"flagged", b.flagged}};
}

inline void to_json(json& j, const ScanReport& r) {
  j = json{{"metric", r.metric.to_string()},
           {"verdict", r.empirically_compatible() ? "empirically-compatible" : "null-suspect-balls"},
           {"min_estimate", r.min_estimate},
           {"balls", r.balls},
           {"flagged_balls", r.flagged_balls}};
}

inline void to_json(json& j, const LimsupCheck& c) {
  j = json{{"pairs", c.pairs}, {"both_windows", c.both_windows}, {"fraction", c.fraction()}};
}

inline void to_json(json& j, const SensitivityReport& r) {
  j = json{{"kind", r.kind == SensitivityReport::Kind::WMeasurable ? "w-measurable" : "pairwise"},
           {"map", r.map.to_string()},
           {"metric", r.metric.to_string()},
           {"delta", r.delta},
           {"horizon", r.horizon},
           {"separation_fraction", r.separation},
           {"per_center_fractions", r.per_center_fractions},
           {"trapped_measures", r.trapped_measures},
           {"pairs_sampled", r.pairs_sampled}};
  if (r.limsup) j["limsup_check"] = *r.limsup;
}

inline void to_json(json& j, const EquivalenceReport& r) {
  j = json{{"pairwise", r.pairwise.separation.value},
           {"w_mean", r.w.separation.value},
           {"gap", r.gap},
           {"threshold", r.threshold},
           {"consistent", r.consistent()},
           {"pairwise_report", r.pairwise},
           {"w_report", r.w}};
}

inline void to_json(json& j, const ConstantSearchReport& r) {
  j = json{{"grid", r.grid},
           {"fractions", r.fractions},
           {"threshold", r.threshold},
           {"delta", r.delta ? json(*r.delta) : json(nullptr)},
           {"monotonicity_violation", r.monotonicity_violation},
           {"centers", r.centers},
           {"horizon", r.horizon}};
}

inline void to_json(json& j, const UniformityReport& r) {
  j = json{{"metric", r.metric.to_string()},
           {"radius", r.radius},
           {"estimates", r.estimates},
           {"max_spread", r.max_spread},
           {"tolerance", r.tolerance},
           {"within_tolerance", r.within_tolerance()},
           {"lipschitz_defect", r.lipschitz_defect},
           {"lipschitz_warning", r.lipschitz_warning}};
}

inline void to_json(json& j, const ClassifyConfig& c) {
  j = json{{"delta_grid", c.delta_grid},
           {"threshold", c.threshold},
           {"horizon", c.horizon},
           {"centers", c.centers},
           {"ys_per_center", c.ys_per_center},
           {"trapped_samples", c.trapped_samples},
           {"isometry_pairs", c.isometry_pairs},
           {"isometry_tolerance", c.isometry_tolerance},
           {"uniformity_radius", c.uniformity_radius},
           {"uniformity_centers", c.uniformity_centers},
           {"uniformity_samples", c.uniformity_samples},
           {"adversarial_centers", c.adversarial_centers}};
}

inline void to_json(json& j, const Verdict& v) {
  j = json{{"label", to_string(v.label)},
           {"delta", v.delta ? json(*v.delta) : json(nullptr)},
           {"isometry_defect", v.isometry_defect ? json(*v.isometry_defect) : json(nullptr)},
           {"ball_uniformity_spread", v.ball_uniformity_spread},
           {"contradiction", v.contradiction},
           {"failing", v.failing},
           {"warnings", v.warnings},
           {"hypotheses", v.hypotheses},
           {"map", v.map.to_string()},
           {"metric", v.metric.to_string()},
           {"config", v.config},
           {"seed", v.seed}};
  json evidence = json::object();
  if (v.search) evidence["sensitivity_constant_search"] = *v.search;
  if (!v.trapped.empty()) evidence["trapped_sets"] = v.trapped;
  if (v.isometry) evidence["isometry_defect"] = *v.isometry;
  if (v.uniformity) evidence["ball_uniformity"] = *v.uniformity;
  j["evidence"] = std::move(evidence);
}

inline void to_json(json& j, const Orbit& o) {
  j = json{{"map", o.map.to_string()}, {"horizon", o.horizon}, {"points", o.points}};
}

// ---------------------------------------------------------------------------
// CSV

/// One line of the flat CSV: map, metric, N, delta, center, fraction, half_width, samples, seed.
struct CsvRow {
  std::string map;
  std::string metric;
  std::uint64_t horizon = 0;
  double delta = 0.0;
  std::string center;  // decimal value, or "all" for pooled rows
  double fraction = 0.0;
  double half_width = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kCsvHeader = "map,metric,N,delta,center,fraction,half_width,samples,seed";

namespace detail {
inline std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

inline void write_csv_row(std::ostream& os, const CsvRow& r) {
  os << detail::csv_field(r.map) << ',' << detail::csv_field(r.metric) << ',' << r.horizon << ','
     << detail::shortest(r.delta) << ',' << detail::csv_field(r.center) << ',' << detail::shortest(r.fraction) << ','
     << detail::shortest(r.half_width) << ',' << r.samples << ',' << r.seed << '\n';
}

inline std::vector<CsvRow> csv_rows(const SensitivityReport& r, std::uint64_t seed) {
  std::vector<CsvRow> rows;
  const auto map = r.map.to_string(), metric = r.metric.to_string();
  for (const auto& c : r.per_center_fractions)
    rows.push_back({map, metric, r.horizon, r.delta, detail::shortest(c.center.to_double()), c.fraction.value,
                    c.fraction.half_width, c.fraction.samples, seed});
  rows.push_back({map, metric, r.horizon, r.delta, "all", r.separation.value, r.separation.half_width,
                  r.separation.samples, seed});
  return rows;
}

/// Scan rows put the ball radius in the delta column and the ball measure in fraction.
inline std::vector<CsvRow> csv_rows(const ScanReport& r, const std::string& map, std::uint64_t horizon,
                                    std::uint64_t seed) {
  std::vector<CsvRow> rows;
  for (const auto& b : r.balls)
    rows.push_back({map, r.metric.to_string(), horizon, b.radius, detail::shortest(b.center.to_double()),
                    b.estimate.value, b.estimate.half_width, b.estimate.samples, seed});
  return rows;
}

inline std::vector<CsvRow> csv_rows(const ConstantSearchReport& r, const std::string& map, const std::string& metric,
                                    std::uint64_t seed) {
  std::vector<CsvRow> rows;
  for (std::size_t i = 0; i < r.grid.size(); ++i)
    rows.push_back({map, metric, r.horizon, r.grid[i], "all", r.fractions[i].value, r.fractions[i].half_width,
                    r.fractions[i].samples, seed});
  return rows;
}

}  // namespace sensilab
