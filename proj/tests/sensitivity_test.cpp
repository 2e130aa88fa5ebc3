#include "oracles.hpp"
#include "sensilab/sensitivity.hpp"

#include <gtest/gtest.h>

#include <cstdint>

using namespace sensilab;

namespace {

MapSpec golden() { return MapSpec::rotation(golden_angle()); }

// Per-center fraction computed through separation_time alone.
MeasureEstimate separation_from(const MapSpec& map, const MetricSpec& metric, const ExactPoint& x, double delta,
                                std::uint64_t horizon, const SeedStream& ys, std::uint64_t samples) {
  std::uint64_t hits = 0;
  for (std::uint64_t j = 0; j < samples; ++j)
    hits += separation_time(map, metric, x, sample_point(ys.child(j), x.precision_bits()), delta, horizon).has_value();
  return MeasureEstimate::monte_carlo(hits, samples);
}

}  // namespace

TEST(SeparationTimeTest, Examples) {
  const unsigned bits = MapSpec::doubling().required_precision(10);
  auto zero = ExactPoint::from_rational(0, 1, bits), third = ExactPoint::from_rational(1, 3, bits);
  EXPECT_EQ(separation_time(MapSpec::doubling(), MetricSpec::euclidean(), zero, third, 0.5, 10), 1u);
  EXPECT_EQ(separation_time(MapSpec::doubling(), MetricSpec::euclidean(), zero, third, 0.5, 0), std::nullopt);

  auto x = ExactPoint::from_rational(1, 5, 256), y = x.plus(ExactPoint::from_double(0.1, 256));
  EXPECT_EQ(separation_time(golden(), MetricSpec::circle(), x, y, 0.2, 1000), std::nullopt);
  EXPECT_EQ(separation_time(MapSpec::identity(), MetricSpec::euclidean(), x, y, 0.11, 1000), std::nullopt);
  EXPECT_EQ(separation_time(MapSpec::identity(), MetricSpec::euclidean(), x, y, 0.05, 1000), 0u);
}

TEST(SeparationTimeTest, WitnessExceedsDelta) {
  SeedStream rng(30);
  const auto map = MapSpec::tent();
  const unsigned bits = map.required_precision(40);
  for (int i = 0; i < 300; ++i) {
    auto x = sample_point(rng.child(i).child(0), bits), y = sample_point(rng.child(i).child(1), bits);
    auto n = separation_time(map, MetricSpec::euclidean(), x, y, 0.7, 40);
    if (!n) continue;
    auto o1 = orbit(map, x, *n), o2 = orbit(map, y, *n);
    EXPECT_GT(euclidean_gap(o1.points.back(), o2.points.back()), 0.7);
    for (std::uint64_t k = 0; k < *n; ++k) EXPECT_LE(euclidean_gap(o1.points[k], o2.points[k]), 0.7);
  }
}

TEST(SeparationTimeTest, RejectsDerivedMetricsAndShortPoints) {
  auto p = ExactPoint::from_rational(1, 3, 64);
  EXPECT_THROW(separation_time(MapSpec::doubling(), MetricSpec::derived(MetricSpec::euclidean(), MapSpec::doubling(), 3),
                               p, p, 0.1, 3),
               std::invalid_argument);
  EXPECT_THROW(separation_time(MapSpec::doubling(), MetricSpec::euclidean(), p, p, 0.1, 3), PrecisionExhausted);
  EXPECT_THROW(separation_time(MapSpec::doubling(), MetricSpec::euclidean(), p, p, 0.0, 0), std::invalid_argument);
}

TEST(DyadicOracleTest, FrozenValue) {
  // only the diagonal pairs fail to separate at this depth
  EXPECT_EQ(oracles::dyadic_doubling(0.4, 20), 0.999755859375);
}

TEST(WSensitivityTest, DoublingSeparatesAlmostEverything) {
  auto r = w_sensitivity_estimate(MapSpec::doubling(), MetricSpec::euclidean(), 0.4, 20, 500, 200, SeedStream(31));
  EXPECT_GE(r.separation.value, 0.999);
  EXPECT_EQ(r.pairs_sampled, 10000u);
  EXPECT_EQ(r.per_center_fractions.size(), 20u);
  EXPECT_TRUE(r.per_center_fractions[0].center.is_zero());
  ASSERT_TRUE(r.limsup.has_value());
  EXPECT_EQ(r.limsup->pairs, 200u);
  EXPECT_GE(r.limsup->fraction(), 0.95);
}

TEST(WSensitivityTest, DoublingAgreesWithDyadicOracle) {
  auto r = w_sensitivity_estimate(MapSpec::doubling(), MetricSpec::euclidean(), 0.4, 20, 500, 20, SeedStream(32));
  EXPECT_NEAR(r.separation.value, oracles::dyadic_doubling(0.4, 20), 0.002);
}

TEST(WSensitivityTest, RotationOnlySeparatesFarPairs) {
  auto r = w_sensitivity_estimate(golden(), MetricSpec::circle(), 0.45, 20, 500, 100, SeedStream(33));
  // {y : circle gap > 0.45} has measure 0.1
  EXPECT_LE(r.separation.value, 0.1 + r.separation.half_width);
  EXPECT_NEAR(r.separation.value, 0.1, r.separation.half_width);
}

TEST(WSensitivityTest, IdentityNeverSeparatesBeyondOne) {
  auto r = w_sensitivity_estimate(MapSpec::identity(), MetricSpec::euclidean(), 1.5, 5, 100, 10, SeedStream(34));
  EXPECT_EQ(r.separation.value, 0.0);
  EXPECT_THROW(w_sensitivity_estimate(MapSpec::identity(), MetricSpec::euclidean(), 0.5, 5, 100, 0, SeedStream(34)),
               std::invalid_argument);
}

TEST(WSensitivityTest, WorkerCountDoesNotChangeReport) {
  EstimatorOptions one{true, {1}}, many{true, {4}};
  auto a = w_sensitivity_estimate(MapSpec::tent(), MetricSpec::euclidean(), 0.5, 8, 100, 30, SeedStream(35), one);
  auto b = w_sensitivity_estimate(MapSpec::tent(), MetricSpec::euclidean(), 0.5, 8, 100, 30, SeedStream(35), many);
  ASSERT_EQ(a.per_center_fractions.size(), b.per_center_fractions.size());
  for (std::size_t i = 0; i < a.per_center_fractions.size(); ++i)
    EXPECT_EQ(a.per_center_fractions[i].fraction.value, b.per_center_fractions[i].fraction.value);
  EXPECT_EQ(a.separation.value, b.separation.value);
}

TEST(TrappedSetTest, RotationTrapsTheCircleBall) {
  auto e = trapped_set_measure(golden(), MetricSpec::circle(), ExactPoint::from_rational(1, 3, 256), 0.2, 100,
                               SeedStream(36), 10000);
  EXPECT_NEAR(e.value, 0.4, e.half_width);
}

TEST(TrappedSetTest, DoublingTrapsNothingAtZero) {
  const unsigned bits = MapSpec::doubling().required_precision(100);
  auto e = trapped_set_measure(MapSpec::doubling(), MetricSpec::euclidean(), ExactPoint(BigInt(0), bits), 0.5, 100,
                               SeedStream(37), 10000);
  EXPECT_LE(e.value, 3e-4);
  EXPECT_TRUE(e.statistically_zero());
}

TEST(TrappedSetTest, IdentityTrapsTheInterval) {
  auto e = trapped_set_measure(MapSpec::identity(), MetricSpec::euclidean(), ExactPoint::from_rational(1, 2, 64), 0.25,
                               50, SeedStream(38), 10000);
  EXPECT_NEAR(e.value, 0.5, e.half_width);
  EXPECT_THROW(trapped_set_measure(MapSpec::identity(), MetricSpec::euclidean(), ExactPoint::from_rational(1, 2, 64),
                                   1.5, 50, SeedStream(38), 1000),
               std::invalid_argument);
}

TEST(PairwiseTest, Examples) {
  auto d = pairwise_sensitivity_estimate(MapSpec::doubling(), MetricSpec::euclidean(), 0.4, 10000, 200, SeedStream(39));
  EXPECT_GE(d.separation.value, 0.999);
  EXPECT_EQ(d.kind, SensitivityReport::Kind::Pairwise);
  auto r = pairwise_sensitivity_estimate(golden(), MetricSpec::circle(), 0.45, 10000, 50, SeedStream(40));
  EXPECT_NEAR(r.separation.value, 0.1, r.separation.half_width);
  auto i = pairwise_sensitivity_estimate(MapSpec::identity(), MetricSpec::circle(), 2.0, 1000, 50, SeedStream(41));
  EXPECT_EQ(i.separation.value, 0.0);
}

TEST(PairwiseTest, WeakInequalityCountsTies) {
  // under Identity the sup is the initial gap; for 1/2 against 0 it equals 1/2 exactly
  auto half = ExactPoint::from_rational(1, 2, 64);
  EXPECT_GE(euclidean_gap(half, ExactPoint(BigInt(0), 64)), 0.5);
  EXPECT_EQ(orbit_sup_distance(MetricSpec::euclidean().base(), MapSpec::identity(), half, ExactPoint(BigInt(0), 64), 5,
                               std::nextafter(0.5, 0.0)),
            0.5);
  EXPECT_EQ(separation_time(MapSpec::identity(), MetricSpec::euclidean(), half, ExactPoint(BigInt(0), 64), 0.5, 5),
            std::nullopt);
}

TEST(EquivalenceTest, Examples) {
  auto d = equivalence_check(MapSpec::doubling(), MetricSpec::euclidean(), 0.4, 10000, 200, SeedStream(42));
  EXPECT_TRUE(d.consistent()) << d.gap << " vs " << d.threshold;
  auto r = equivalence_check(golden(), MetricSpec::circle(), 0.45, 10000, 50, SeedStream(43));
  EXPECT_TRUE(r.consistent()) << r.gap << " vs " << r.threshold;
  auto i = equivalence_check(MapSpec::identity(), MetricSpec::euclidean(), 2.0, 1000, 10, SeedStream(44));
  EXPECT_EQ(i.gap, 0.0);
}

TEST(EquivalenceTest, ExpandingFamilyIsConsistent) {
  std::uint64_t tag = 0;
  for (const auto& map : {MapSpec::radic(3), MapSpec::radic(5), MapSpec::tent()}) {
    auto r = equivalence_check(map, MetricSpec::euclidean(), 0.4, 4000, 60, SeedStream(45).child(tag++));
    EXPECT_TRUE(r.consistent()) << map.to_string() << ": " << r.gap << " vs " << r.threshold;
  }
}

TEST(ConstantSearchTest, DoublingWithAndWithoutAdversarialCenters) {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto with = sensitivity_constant_search(MapSpec::doubling(), MetricSpec::euclidean(), grid, 0.99, 20, 500, 200,
                                          SeedStream(46));
  ASSERT_TRUE(with.delta.has_value());
  // center 1/3 has orbit {1/3, 2/3}, so no y gets further than 2/3 from it
  EXPECT_DOUBLE_EQ(*with.delta, 0.6);
  EXPECT_FALSE(with.monotonicity_violation);
  EstimatorOptions uniform{false, {}};
  auto without = sensitivity_constant_search(MapSpec::doubling(), MetricSpec::euclidean(), grid, 0.99, 20, 500, 200,
                                             SeedStream(46), uniform);
  ASSERT_TRUE(without.delta.has_value());
  EXPECT_GE(*without.delta, 0.8);
}

TEST(ConstantSearchTest, IsometriesHaveNoConstant) {
  const std::vector<double> grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45};
  auto r = sensitivity_constant_search(golden(), MetricSpec::circle(), grid, 0.99, 20, 200, 100, SeedStream(47));
  EXPECT_FALSE(r.delta.has_value());
  auto i = sensitivity_constant_search(MapSpec::identity(), MetricSpec::euclidean(), grid, 0.99, 20, 200, 10,
                                       SeedStream(48));
  EXPECT_FALSE(i.delta.has_value());
  EXPECT_THROW(sensitivity_constant_search(golden(), MetricSpec::circle(), {0.3, 0.2}, 0.99, 2, 2, 2, SeedStream(1)),
               std::invalid_argument);
  EXPECT_THROW(sensitivity_constant_search(golden(), MetricSpec::circle(), {0.2}, 1.5, 2, 2, 2, SeedStream(1)),
               std::invalid_argument);
}

TEST(ConstantSearchTest, GridFractionsMatchSingleDeltaEstimates) {
  const std::vector<double> grid{0.2, 0.5, 0.8};
  auto s = sensitivity_constant_search(MapSpec::tent(), MetricSpec::euclidean(), grid, 0.99, 6, 150, 25, SeedStream(49));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto w = w_sensitivity_estimate(MapSpec::tent(), MetricSpec::euclidean(), grid[k], 6, 150, 25, SeedStream(49));
    EXPECT_EQ(s.fractions[k].value, w.separation.value) << grid[k];
  }
}

// Properties

TEST(SensitivityPropertyTest, Complementarity) {
  for (const auto& [map, metric] : {std::pair{golden(), MetricSpec::circle()},
                                    std::pair{MapSpec::doubling(), MetricSpec::euclidean()},
                                    std::pair{MapSpec::identity(), MetricSpec::euclidean()}}) {
    const SeedStream rng(50);
    auto r = w_sensitivity_estimate(map, metric, 0.3, 6, 400, 8, rng);
    for (std::size_t i = 0; i < r.per_center_fractions.size(); ++i) {
      EXPECT_EQ(r.per_center_fractions[i].fraction.value + r.trapped_measures[i].value, 1.0);
      // the standalone estimator on the same y stream sees the same events
      auto t = trapped_set_measure(map, metric, r.per_center_fractions[i].center, 0.3, 8, center_ys_stream(rng, i), 400);
      EXPECT_EQ(r.per_center_fractions[i].fraction.value + t.value, 1.0) << map.to_string() << " center " << i;
    }
  }
}

TEST(SensitivityPropertyTest, MonotoneInHorizon) {
  // samples at different precisions share their leading bits, so they are nested
  for (const auto& map : {MapSpec::doubling(), MapSpec::tent(), MapSpec::radic(3)}) {
    double prev_sep = 0.0, prev_trap = 1.0;
    for (std::uint64_t n : {1u, 2u, 3u, 5u, 8u, 13u}) {
      auto r = w_sensitivity_estimate(map, MetricSpec::euclidean(), 0.6, 5, 300, n, SeedStream(51));
      EXPECT_GE(r.separation.value, prev_sep) << map.to_string() << " N=" << n;
      prev_sep = r.separation.value;
      const unsigned bits = map.required_precision(n);
      auto t = trapped_set_measure(map, MetricSpec::euclidean(), ExactPoint::from_rational(1, 7, bits), 0.6, n,
                                   SeedStream(52), 500);
      EXPECT_LE(t.value, prev_trap) << map.to_string() << " N=" << n;
      prev_trap = t.value;
    }
  }
}

TEST(SensitivityPropertyTest, MonotoneInDelta) {
  const std::vector<double> grid{0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
  for (const auto& map : {MapSpec::doubling(), MapSpec::tent(), golden()}) {
    auto s = sensitivity_constant_search(map, MetricSpec::euclidean(), grid, 0.99, 8, 200, 6, SeedStream(53));
    for (std::size_t k = 1; k < grid.size(); ++k) EXPECT_LE(s.fractions[k].value, s.fractions[k - 1].value);
  }
}

TEST(SensitivityPropertyTest, TrappedSetEqualsDerivedBall) {
  std::uint64_t tag = 0;
  for (const auto& map : {MapSpec::doubling(), MapSpec::tent(), golden(), MapSpec::identity()}) {
    for (double delta : {0.1, 0.45, 1.0}) {
      const std::uint64_t n = 12;
      auto derived = MetricSpec::derived(MetricSpec::euclidean(), map, n);
      auto x = sample_point(SeedStream(54).child(tag), derived.sample_precision());
      auto rng = SeedStream(55).child(tag++);
      auto t = trapped_set_measure(map, MetricSpec::euclidean(), x, delta, n, rng, 1000);
      auto b = ball_measure(derived, x, delta, rng, 1000);
      EXPECT_EQ(t.value, b.value) << map.to_string() << " delta " << delta;
    }
  }
}

TEST(SensitivityPropertyTest, PullbackAlongTheOrbit) {
  const auto map = MapSpec::doubling();
  const auto euclid = MetricSpec::euclidean();

  // converged horizon: statistics from x and from T^k x agree
  auto x = sample_point(SeedStream(56), map.required_precision(210));
  auto from_x = separation_from(map, euclid, x, 0.4, 200, SeedStream(57), 2000);
  auto tx = x;
  for (std::uint64_t k = 1; k <= 10; ++k) {
    tx = iterate(map, tx);
    auto from_tx = separation_from(map, euclid, tx, 0.4, 200, SeedStream(58).child(k), 2000);
    EXPECT_LE(std::abs(from_x.value - from_tx.value), from_x.half_width + from_tx.half_width) << "k=" << k;
  }

  // short horizon: y = T^k y' with y' uniform is uniform, and separating from
  // T^k x within N is separating from x in the window [k, k + N]
  const std::uint64_t horizon = 3;
  const double delta = 0.4;
  const std::uint64_t samples = 4000;
  for (std::uint64_t k : {1u, 4u, 10u}) {
    const unsigned bits = map.required_precision(horizon + k);
    auto base = sample_point(SeedStream(59), bits);
    auto shifted = base;
    for (std::uint64_t n = 0; n < k; ++n) shifted = iterate(map, shifted);
    std::uint64_t pulled = 0, windowed = 0;
    for (std::uint64_t j = 0; j < samples; ++j) {
      auto y = sample_point(SeedStream(60).child(k).child(j), bits);
      auto o = orbit(map, y, horizon + k), ox = orbit(map, base, horizon + k);
      pulled += separation_time(map, euclid, shifted, o.points[k], delta, horizon).has_value();
      bool hit = false;
      for (std::uint64_t n = k; n <= k + horizon; ++n) hit |= euclidean_gap(ox.points[n], o.points[n]) > delta;
      windowed += hit;
    }
    EXPECT_EQ(pulled, windowed) << "k=" << k;
    auto p = MeasureEstimate::monte_carlo(pulled, samples);
    auto fresh = separation_from(map, euclid, shifted, delta, horizon, SeedStream(61).child(k), samples);
    EXPECT_LE(std::abs(p.value - fresh.value), p.half_width + fresh.half_width) << "k=" << k;
    EXPECT_LT(fresh.value, 1.0);
  }
}
