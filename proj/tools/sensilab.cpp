// sensilab: command-line harness over the sensilab library.
//
// Exit status: 0 on completion, 2 on a configuration error, 3 when a point
// has too few bits for the requested horizon.

#include "sensilab/sensilab.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace sensilab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPrecision = 3;

struct Options {
  std::string map;  // empty: the derived metric's map, else radic:2
  std::string metric = "euclidean";
  std::uint64_t horizon = 200;
  double delta = 0.4;
  std::vector<double> delta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  bool grid_given = false;
  std::optional<std::uint64_t> centers, ys_per_center, pairs, samples, trials;
  double threshold = 0.99;
  double iso_tol = 0x1p-40;
  std::vector<double> radii{0.01, 0.05, 0.1, 0.25, 0.5};
  double uniformity_radius = 0.1;
  std::uint64_t uniformity_centers = 10;
  std::uint64_t uniformity_samples = 4000;
  std::uint64_t trapped_samples = 2000;
  bool uniform_centers = false;
  std::string x = "0";
  unsigned bits = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out = "-";
  std::string csv;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

MapSpec resolve_map(const Options& o, const MetricSpec& metric) {
  if (!o.map.empty()) return MapSpec::parse(o.map);
  return metric.is_derived() ? metric.derived_part().map : MapSpec::doubling();
}

ExactPoint parse_point(const std::string& text, unsigned bits) {
  if (text.rfind("0x", 0) == 0) return ExactPoint::from_hex(text);
  if (auto slash = text.find('/'); slash != std::string::npos) {
    try {
      return ExactPoint::from_rational(std::stoull(text.substr(0, slash)), std::stoull(text.substr(slash + 1)), bits);
    } catch (const std::logic_error&) {
      throw ConfigError("--x: expected p/q, a decimal in [0,1) or 0x..@bits, got '" + text + "'");
    }
  }
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw ConfigError("--x: expected p/q, a decimal in [0,1) or 0x..@bits, got '" + text + "'");
  }
  return ExactPoint::from_double(v, bits);
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

class Emitter {
 public:
  Emitter(const Options& o, std::string command, json echo) : command_(std::move(command)), echo_(std::move(echo)) {
    if (o.out != "-") {
      file_ = std::make_unique<std::ofstream>(o.out, std::ios::binary);
      if (!*file_) throw ConfigError("cannot open --out file '" + o.out + "'");
    }
    if (!o.csv.empty()) {
      csv_ = std::make_unique<std::ofstream>(o.csv, std::ios::binary);
      if (!*csv_) throw ConfigError("cannot open --csv file '" + o.csv + "'");
      *csv_ << kCsvHeader << '\n';
    }
    seed_ = o.seed;
  }

  void record(const std::string& type, json report) {
    json line{{"command", command_}, {"record", type}, {"seed", seed_}, {"config", echo_}, {"report", std::move(report)}};
    (file_ ? *file_ : std::cout) << line.dump() << '\n';
  }

  void rows(const std::vector<CsvRow>& rs) {
    if (!csv_) return;
    for (const auto& r : rs) write_csv_row(*csv_, r);
  }

 private:
  std::string command_;
  json echo_;
  std::uint64_t seed_ = 0;
  std::unique_ptr<std::ofstream> file_, csv_;
};

// Resolved values only; --workers and the output paths never change report
// bytes, so they are not part of the echo.
json echo(const Options& o, const MapSpec& map, const MetricSpec& metric, json resolved) {
  json j{{"map", map.to_string()},          {"metric", metric.to_string()}, {"horizon", o.horizon},
         {"threshold", o.threshold},        {"iso_tol", o.iso_tol},         {"seed", o.seed},
         {"adversarial_centers", !o.uniform_centers}};
  j.update(resolved);
  return j;
}

EstimatorOptions estimator_options(const Options& o) { return {!o.uniform_centers, {o.workers}}; }

int run_orbit(const Options& o) {
  auto metric = MetricSpec::parse(o.metric);
  auto map = resolve_map(o, metric);
  const unsigned bits = o.bits ? o.bits : map.required_precision(o.horizon);
  auto x = parse_point(o.x, bits);
  Emitter out(o, "orbit", echo(o, map, metric, {{"x", x.to_hex()}, {"bits", x.precision_bits()}}));
  out.record("orbit", orbit(map, x, o.horizon));
  return 0;
}

int run_metric_check(const Options& o) {
  auto metric = MetricSpec::parse(o.metric);
  auto map = resolve_map(o, metric);
  const std::uint64_t trials = o.trials.value_or(1000), pairs = o.pairs.value_or(2000);
  Emitter out(o, "metric-check", echo(o, map, metric, {{"trials", trials}, {"pairs", pairs}}));
  SeedStream rng(o.seed);
  Parallelism par{o.workers};
  auto lip = lipschitz_defect(metric, map, rng.child(1), pairs, par);
  out.record("metric_axioms", verify_metric_axioms(metric, rng.child(0), trials, par));
  out.record("lipschitz_defect", lip);
  out.record("isometry_defect", isometry_defect(metric, map, rng.child(2), pairs, par));
  return 0;
}

int run_scan(const Options& o) {
  auto metric = MetricSpec::parse(o.metric);
  auto map = resolve_map(o, metric);
  const std::uint64_t centers = o.centers.value_or(10), samples = o.samples.value_or(2000);
  Emitter out(o, "scan",
              echo(o, map, metric, {{"radii", o.radii}, {"centers", centers}, {"samples", samples}}));
  auto r = mu_compatibility_scan(metric, o.radii, SeedStream(o.seed), centers, samples, {o.workers});
  const std::uint64_t horizon = metric.is_derived() ? metric.derived_part().horizon : 0;
  out.record("mu_compatibility_scan", r);
  out.rows(csv_rows(r, map.to_string(), horizon, o.seed));
  return 0;
}

int run_sensitivity(const Options& o) {
  auto metric = MetricSpec::parse(o.metric);
  auto map = resolve_map(o, metric);
  const std::uint64_t centers = o.centers.value_or(20), ys = o.ys_per_center.value_or(500),
                      samples = o.samples.value_or(10000);
  const unsigned bits = o.bits ? o.bits : map.required_precision(o.horizon);
  auto x = parse_point(o.x, bits);
  json resolved{{"delta", o.delta},     {"centers", centers}, {"ys_per_center", ys},
                {"samples", samples},   {"x", x.to_hex()},    {"delta_grid", o.grid_given ? json(o.delta_grid) : json(nullptr)}};
  Emitter out(o, "sensitivity", echo(o, map, metric, resolved));
  SeedStream rng(o.seed);
  auto w = w_sensitivity_estimate(map, metric, o.delta, centers, ys, o.horizon, rng.child(0), estimator_options(o));
  auto trapped = trapped_set_measure(map, metric, x, std::min(o.delta, 1.0), o.horizon, rng.child(1), samples,
                                     {o.workers});
  out.record("w_sensitivity", w);
  out.record("trapped_set", json{{"center", x}, {"delta", std::min(o.delta, 1.0)}, {"horizon", o.horizon},
                                 {"estimate", trapped}});
  out.rows(csv_rows(w, o.seed));
  if (o.grid_given) {
    auto s = sensitivity_constant_search(map, metric, o.delta_grid, o.threshold, centers, ys, o.horizon, rng.child(2),
                                         estimator_options(o));
    out.record("sensitivity_constant_search", s);
    out.rows(csv_rows(s, map.to_string(), metric.to_string(), o.seed));
  }
  return 0;
}

int run_pairwise(const Options& o) {
  auto metric = MetricSpec::parse(o.metric);
  auto map = resolve_map(o, metric);
  const std::uint64_t pairs = o.pairs.value_or(10000);
  Emitter out(o, "pairwise", echo(o, map, metric, {{"delta", o.delta}, {"pairs", pairs}}));
  SeedStream rng(o.seed);
  auto p = pairwise_sensitivity_estimate(map, metric, o.delta, pairs, o.horizon, rng.child(0), {o.workers});
  out.record("pairwise_sensitivity", p);
  out.record("equivalence_check", equivalence_check(map, metric, o.delta, pairs, o.horizon, rng.child(1),
                                                    estimator_options(o)));
  out.rows(csv_rows(p, o.seed));
  return 0;
}

int run_classify(const Options& o) {
  auto metric = MetricSpec::parse(o.metric);
  auto map = resolve_map(o, metric);
  ClassifyConfig c;
  c.delta_grid = o.delta_grid;
  c.threshold = o.threshold;
  c.horizon = o.horizon;
  c.centers = o.centers.value_or(c.centers);
  c.ys_per_center = o.ys_per_center.value_or(c.ys_per_center);
  c.trapped_samples = o.trapped_samples;
  c.isometry_pairs = o.pairs.value_or(c.isometry_pairs);
  c.isometry_tolerance = o.iso_tol;
  c.uniformity_radius = o.uniformity_radius;
  c.uniformity_centers = o.uniformity_centers;
  c.uniformity_samples = o.samples.value_or(o.uniformity_samples);
  c.adversarial_centers = !o.uniform_centers;
  Emitter out(o, "classify", echo(o, map, metric, json{{"classify", c}}));
  auto v = dichotomy_classify(map, metric, c, SeedStream(o.seed), {o.workers});
  out.record("verdict", v);
  if (v.search) out.rows(csv_rows(*v.search, map.to_string(), metric.to_string(), o.seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensitivity and isometry experiments for measure-preserving maps of [0,1)."};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file; command-line flags override its keys");
  app.get_config_ptr()->group("Run");

  Options o;
  const std::string budgets = "Budgets (defaults depend on the command)";
  app.add_option("--map", o.map, "radic:<r>, doubling, tent, identity, rotation:golden|sqrt<n>|0x..@bits "
                                 "(default: the derived metric's map, else radic:2)");
  app.add_option("--metric", o.metric, "euclidean, circle, power:<s>, derived(<base>; <map>; N=<n>)")
      ->capture_default_str();
  app.add_option("--horizon,-N", o.horizon, "Orbit horizon N")->capture_default_str();
  app.add_option("--delta", o.delta, "Separation threshold")->capture_default_str();
  auto* grid = app.add_option("--delta-grid", o.delta_grid, "Ascending delta grid, comma separated")
                   ->delimiter(',')
                   ->capture_default_str();
  app.add_option("--centers", o.centers, "Centers (sensitivity 20, scan 10, classify 20)")->group(budgets);
  app.add_option("--ys-per-center", o.ys_per_center, "Samples per center (500)")->group(budgets);
  app.add_option("--pairs", o.pairs, "Pairs (pairwise 10000, metric-check 2000, classify isometry 2000)")
      ->group(budgets);
  app.add_option("--samples", o.samples, "Monte Carlo samples (sensitivity 10000, scan 2000, classify 4000)")
      ->group(budgets);
  app.add_option("--trials", o.trials, "Axiom triples for metric-check (1000)")->group(budgets);
  app.add_option("--trapped-samples", o.trapped_samples, "Samples per trapped set in classify")
      ->group(budgets)
      ->capture_default_str();
  app.add_option("--threshold", o.threshold, "Separation fraction a delta must reach")->capture_default_str();
  app.add_option("--iso-tol", o.iso_tol, "Isometry tolerance on distances")->capture_default_str();
  app.add_option("--radii", o.radii, "Scan radii, comma separated")->delimiter(',')->capture_default_str();
  app.add_option("--uniformity-radius", o.uniformity_radius)->capture_default_str();
  app.add_option("--uniformity-centers", o.uniformity_centers)->capture_default_str();
  app.add_flag("--uniform-centers", o.uniform_centers, "Drop the adversarial centers 0, 1/2, 1/3 and fixed points");
  app.add_option("--x", o.x, "Point: p/q, decimal, or 0x..@bits")->capture_default_str();
  app.add_option("--bits", o.bits, "Precision for --x given as p/q or decimal (default: enough for the horizon)");
  app.add_option("--seed", o.seed, "64-bit seed")->envname("SENSILAB_SEED")->capture_default_str()->group("Run");
  app.add_option("--workers", o.workers, "Worker threads; output does not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str()
      ->group("Run");
  app.add_option("--out", o.out, "JSON-lines output file, - for stdout")->capture_default_str()->group("Run");
  app.add_option("--csv", o.csv, "CSV output file (map,metric,N,delta,center,fraction,half_width,samples,seed)")
      ->group("Run");

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const std::vector<Command> commands{
      {"orbit", "Orbit table of --x for N steps", run_orbit},
      {"metric-check", "Metric axioms, Lipschitz and isometry defects", run_metric_check},
      {"scan", "Ball-measure scan for mu-compatibility", run_scan},
      {"sensitivity", "Per-center sensitivity and the trapped set at --x", run_sensitivity},
      {"pairwise", "Pairwise sensitivity and its equivalence check", run_pairwise},
      {"classify", "Sensitive / IsometryLike / Inconclusive verdict", run_classify},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) subs.push_back(app.add_subcommand(c.name, c.help)->fallthrough());

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  o.grid_given = grid->count() > 0;

  try {
    for (std::size_t i = 0; i < commands.size(); ++i)
      if (subs[i]->parsed()) return commands[i].run(o);
  } catch (const PrecisionExhausted& e) {
    std::cerr << "precision exhausted: " << e.what() << '\n';
    return kExitPrecision;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitConfig;
}
