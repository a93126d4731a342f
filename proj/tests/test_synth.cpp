#include "deepspace/synth.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "deepspace/encode.hpp"
#include "support/oracles.hpp"

namespace deepspace {
namespace {

std::map<StationKey, std::size_t> station_ids(const SynthWorld& world) {
  std::map<StationKey, std::size_t> ids;
  for (std::size_t g = 0; g < world.num_stations(); ++g) {
    ids.emplace(station_key(world.station_point(g)), g);
  }
  return ids;
}

std::vector<std::size_t> label_sequence(const SynthWorld& world,
                                        const std::vector<UdrRecord>& records) {
  const auto ids = station_ids(world);
  std::vector<std::size_t> labels;
  labels.reserve(records.size());
  for (const auto& rec : records) {
    labels.push_back(ids.at(station_key(rec.location)));
  }
  return labels;
}

TEST(World, CountsAndDeterminism) {
  const auto world = generate_world(2, 2, WorldConfig{}, 42);
  EXPECT_EQ(world.num_lacs(), 2u);
  EXPECT_EQ(world.num_stations(), 4u);
  EXPECT_EQ(world.lac_ids.size(), 2u);

  const auto again = generate_world(2, 2, WorldConfig{}, 42);
  for (std::size_t g = 0; g < 4; ++g) {
    EXPECT_EQ(world.station_point(g).longitude, again.station_point(g).longitude);
    EXPECT_EQ(world.station_point(g).latitude, again.station_point(g).latitude);
  }
  const auto different = generate_world(2, 2, WorldConfig{}, 43);
  EXPECT_NE(world.station_point(0).longitude, different.station_point(0).longitude);
}

TEST(World, StationsWithinScatterRadius) {
  WorldConfig cfg;
  cfg.scatter_radius_km = 3.0;
  const auto world = generate_world(4, 8, cfg, 7);
  for (std::size_t lac = 0; lac < world.num_lacs(); ++lac) {
    for (const auto& st : world.stations[lac]) {
      EXPECT_LE(great_circle_distance(world.lac_centers[lac], st),
                cfg.scatter_radius_km + 0.01);
    }
  }
}

TEST(World, StationsDistinctAtFiveDecimals) {
  const auto world = generate_world(5, 20, WorldConfig{}, 11);
  const auto ids = station_ids(world);
  EXPECT_EQ(ids.size(), world.num_stations());
}

TEST(World, TinyBoxThrows) {
  WorldConfig cfg;
  cfg.lon_min = 119.0;
  cfg.lon_max = 119.0001;
  cfg.lat_min = 28.0;
  cfg.lat_max = 28.0001;
  EXPECT_THROW(generate_world(2, 2, cfg, 1), BoxTooSmall);
}

TEST(Persona, RowsAreStochastic) {
  const auto world = generate_world(3, 4, WorldConfig{}, 3);
  const auto persona = make_persona(world, 0.5, 4);
  for (const auto& row : persona.lac_transition) {
    double sum = 0.0;
    for (double p : row) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  for (const auto& matrix : persona.station_transition) {
    for (const auto& row : matrix) {
      double sum = 0.0;
      for (double p : row) sum += p;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(persona.routine.size(), world.num_stations());
}

TEST(Trajectory, CountingInvariant) {
  const auto world = generate_world(2, 3, WorldConfig{}, 5);
  const auto persona = make_persona(world, 0.9, 6);
  const auto records = generate_trajectory(world, persona, "u", 23, 200, 7);
  EXPECT_EQ(records.size(), 23u * 200u);
}

TEST(Trajectory, SeedDeterminism) {
  const auto world = generate_world(2, 3, WorldConfig{}, 5);
  const auto persona = make_persona(world, 0.7, 6);
  const auto a = generate_trajectory(world, persona, "u", 3, 60, 7);
  const auto b = generate_trajectory(world, persona, "u", 3, 60, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i] == b[i]);
  const auto c = generate_trajectory(world, persona, "u", 3, 60, 8);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == c[i])) any_difference = true;
  }
  EXPECT_TRUE(any_difference);
}

TEST(Trajectory, FullRegularityRepeatsDaily) {
  const auto world = generate_world(2, 3, WorldConfig{}, 5);
  const auto persona = make_persona(world, 1.0, 6);
  const std::size_t rpd = 80;
  const auto records = generate_trajectory(world, persona, "u", 2, rpd, 9);
  const auto labels = label_sequence(world, records);
  for (std::size_t r = 0; r < rpd; ++r) {
    EXPECT_EQ(labels[r], labels[rpd + r]) << "slot " << r;
  }
}

TEST(Trajectory, TimestampsOrderedAndSpeedBounded) {
  const auto world = generate_world(3, 4, WorldConfig{}, 15);
  const auto persona = make_persona(world, 0.8, 16);
  const auto records = generate_trajectory(world, persona, "u", 5, 150, 17);
  const GenConfig cfg;
  for (std::size_t j = 1; j < records.size(); ++j) {
    EXPECT_LE(records[j - 1].stime, records[j - 1].etime);
    EXPECT_LT(records[j - 1].etime, records[j].stime);
    const double dist =
        great_circle_distance(records[j - 1].location, records[j].location);
    if (dist > 0.0) {
      const double speed =
          travel_speed(dist, records[j - 1].etime, records[j].stime);
      EXPECT_LE(speed, cfg.v_travel_kmh + 1e-9);
    }
  }
}

TEST(Trajectory, ZeroRegularityIsUniformOverStations) {
  // Equal station counts per LAC + uniform matrices -> uniform over all
  // stations. Chi-square over 1e5 steps, alpha = 0.01, df = 5 -> 15.086.
  const auto world = generate_world(2, 3, WorldConfig{}, 21);
  const auto persona = make_persona(world, 0.0, 22);
  const std::size_t steps = 100000;
  const auto records = generate_trajectory(world, persona, "u", 10, steps / 10, 23);
  const auto labels = label_sequence(world, records);
  std::vector<std::size_t> counts(world.num_stations(), 0);
  for (std::size_t label : labels) ++counts[label];

  const double expected =
      static_cast<double>(steps) / static_cast<double>(world.num_stations());
  double chi2 = 0.0;
  for (std::size_t c : counts) {
    const double diff = static_cast<double>(c) - expected;
    chi2 += diff * diff / expected;
  }
  EXPECT_LT(chi2, 15.086);

  const double p = 1.0 / static_cast<double>(world.num_stations());
  for (std::size_t c : counts) {
    EXPECT_NEAR(static_cast<double>(c) / static_cast<double>(steps), p,
                testing::binomial_3sigma(p, steps));
  }
}

TEST(Anomalies, RateZeroIsIdentity) {
  const auto world = generate_world(2, 3, WorldConfig{}, 25);
  const auto persona = make_persona(world, 0.9, 26);
  const auto records = generate_trajectory(world, persona, "u", 2, 50, 27);
  const auto injected = inject_anomalies(records, 0.0, 28);
  ASSERT_EQ(injected.records.size(), records.size());
  EXPECT_TRUE(injected.truth.empty());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_TRUE(injected.records[i] == records[i]);
  }
}

TEST(Anomalies, RateOneOnStationaryPairInjectsExactlyOne) {
  UdrRecord a;
  a.phonenum = "u";
  a.stime = 100;
  a.etime = 150;
  a.lacid = "A";
  a.location = GeoPoint{119.5, 28.5};
  UdrRecord b = a;
  b.stime = 300;
  b.etime = 350;
  // A second station must exist somewhere in the stream to borrow.
  UdrRecord c = a;
  c.stime = 4000;
  c.etime = 4050;
  c.location = GeoPoint{119.51, 28.51};
  c.lacid = "B";

  const auto injected = inject_anomalies({a, b, c}, 1.0, 1);
  ASSERT_EQ(injected.truth.size(), 1u);
  EXPECT_EQ(injected.truth[0].record_index, 1u);
  EXPECT_FALSE(same_station(injected.records[1].location, a.location));
}

TEST(Anomalies, CleaningRecoversInjectedLocations) {
  const auto world = generate_world(3, 4, WorldConfig{}, 29);
  const auto persona = make_persona(world, 0.9, 30);
  const auto records = generate_trajectory(world, persona, "u", 5, 200, 31);
  const auto injected = inject_anomalies(records, 0.05, 32);
  ASSERT_GT(injected.truth.size(), 10u);

  const auto cleaned = clean_pipeline(injected.records, CleanConfig{});
  ASSERT_EQ(cleaned.size(), 1u);
  const auto& pts = cleaned[0].points;
  ASSERT_EQ(pts.size(), records.size());

  std::size_t recovered = 0;
  for (const auto& truth : injected.truth) {
    if (same_station(pts[truth.record_index].location, truth.original_location) &&
        pts[truth.record_index].lacid == truth.original_lacid) {
      ++recovered;
    }
  }
  EXPECT_GE(static_cast<double>(recovered),
            0.95 * static_cast<double>(injected.truth.size()));
}

TEST(Bayes, MonotoneInRegularity) {
  const auto world = generate_world(2, 3, WorldConfig{}, 33);
  double previous = -1.0;
  for (double regularity : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    auto persona = make_persona(world, regularity, 34);
    const double acc = bayes_accuracy(world, persona, 60, 35);
    EXPECT_GE(acc + 1e-12, previous) << "regularity " << regularity;
    previous = acc;
  }
}

TEST(Bayes, ClosedFormMatchesSampledFrequency) {
  // At regularity r with uniform noise over k equal stations the optimal
  // predictor follows the routine: accuracy r + (1-r)/k.
  const auto world = generate_world(2, 3, WorldConfig{}, 37);
  auto persona = make_persona(world, 0.6, 38);
  const double closed = bayes_accuracy(world, persona, 60, 39);
  EXPECT_NEAR(closed, 0.6 + 0.4 / 6.0, 1e-9);

  // Empirical: frequency of the routine label among generated records.
  const std::size_t days = 200;
  const auto records = generate_trajectory(world, persona, "u", days, 60, 39);
  const auto labels = label_sequence(world, records);
  // Count hits of the Bayes predictor = routine label of each slot.
  std::size_t hits = 0;
  const auto persona_regular = [&] {
    auto p = persona;
    p.regularity = 1.0;
    return p;
  }();
  const auto routine_records =
      generate_trajectory(world, persona_regular, "u", 1, 60, 39);
  const auto routine_labels = label_sequence(world, routine_records);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == routine_labels[i % 60]) ++hits;
  }
  const double empirical =
      static_cast<double>(hits) / static_cast<double>(labels.size());
  EXPECT_NEAR(empirical, closed, testing::binomial_3sigma(closed, labels.size()));
}

TEST(Synth, EmitsParsableCsv) {
  const auto world = generate_world(2, 2, WorldConfig{}, 41);
  const auto persona = make_persona(world, 0.9, 42);
  const auto records = generate_trajectory(world, persona, "7391", 2, 30, 43);
  std::ostringstream out;
  write_udr_csv(out, records);
  std::istringstream in(out.str());
  const auto parsed = parse_udr_csv(in);
  EXPECT_EQ(parsed.records.size(), records.size());
  EXPECT_TRUE(parsed.rejected.empty());
}

}  // namespace
}  // namespace deepspace
