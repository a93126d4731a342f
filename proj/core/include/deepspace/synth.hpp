#ifndef DEEPSPACE_SYNTH_HPP
#define DEEPSPACE_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deepspace/ingest.hpp"
#include "deepspace/rng.hpp"

namespace deepspace {

struct WorldConfig {
  double lon_min = 119.0;  ///< default box: the region the record format models
  double lon_max = 121.0;
  double lat_min = 28.0;
  double lat_max = 30.0;
  double scatter_radius_km = 2.0;  ///< stations scatter around their LAC center
  GeoConfig geo;
};

/// Station/LAC geometry. Stations are grouped by LAC; the global station id
/// enumerates LACs in order, stations within a LAC in order.
struct SynthWorld {
  std::vector<GeoPoint> lac_centers;
  std::vector<std::vector<GeoPoint>> stations;  ///< per LAC
  std::vector<std::string> lac_ids;
  WorldConfig config;

  std::size_t num_lacs() const { return lac_centers.size(); }
  std::size_t num_stations() const;

  std::size_t lac_of_station(std::size_t global_id) const;
  std::size_t local_of_station(std::size_t global_id) const;
  const GeoPoint& station_point(std::size_t global_id) const;
  const std::string& lacid_of_station(std::size_t global_id) const;
};

/// Deterministic under seed. Station coordinates are quantized to 5 decimals
/// and must be pairwise distinct at that precision; throws BoxTooSmall when
/// 1000 attempts cannot place a station.
SynthWorld generate_world(std::size_t n_lacs, std::size_t stations_per_lac,
                          const WorldConfig& cfg, std::uint64_t seed);

/// A user's mobility program: a deterministic daily routine blended with
/// two-level Markov noise.
///
/// Each day is divided into routine.size() equal slots; the routine names
/// the station for each slot. Per record, with probability `regularity` the
/// user is at the routine station for the record's slot; otherwise one noise
/// transition fires: next LAC from lac_transition given the current LAC,
/// then a station inside it (station_transition row when staying in the
/// same LAC, uniform when switching).
struct Persona {
  std::size_t home = 0;  ///< global station ids
  std::size_t work = 0;
  std::vector<std::size_t> routine;
  std::vector<std::vector<double>> lac_transition;  ///< n' x n', row-stochastic
  std::vector<std::vector<std::vector<double>>> station_transition;  ///< per LAC
  double mobility_rate = 200.0;  ///< expected records per day
  double regularity = 0.9;       ///< [0,1]
};

/// Default persona: uniform transition matrices, home/work in distinct LACs
/// when possible, and a grand-tour routine visiting every station once
/// (period = station count).
Persona make_persona(const SynthWorld& world, double regularity,
                     std::uint64_t seed);

struct GenConfig {
  Timestamp start_time = 1416441600;  ///< 2014-11-20 00:00:00
  double v_travel_kmh = 100.0;  ///< keeps generated hops below any sane v_max
  int session_max_s = 300;
  std::uint32_t min_gap_s = 2;
  /// Probability that a record logs a different station of the same LAC than
  /// the one the user is at (coverage-overlap association noise). Leaves the
  /// coarse-scale sequence untouched while blurring the fine scale.
  double station_flap = 0.0;
};

/// Time-ordered records, exactly records_per_day per simulated day. Record
/// arrival offsets within the day are drawn once per user (a daily rhythm),
/// so at regularity 1 the fine-label sequence repeats identically every day.
/// Consecutive-record travel speeds never exceed cfg.v_travel_kmh: moves get
/// a travel-time floor between records.
std::vector<UdrRecord> generate_trajectory(const SynthWorld& world,
                                           const Persona& persona,
                                           const std::string& user,
                                           std::size_t days,
                                           std::size_t records_per_day,
                                           std::uint64_t seed,
                                           const GenConfig& cfg = {});

struct InjectionTruth {
  std::size_t record_index = 0;
  GeoPoint original_location;
  std::string original_lacid;
};

struct InjectionResult {
  std::vector<UdrRecord> records;
  std::vector<InjectionTruth> truth;
};

/// Plants base-station-switching anomalies on a Bernoulli(rate) subset of
/// the stationary consecutive pairs (pairs whose two records share one
/// station; those are the pairs the switching phenomenon produces in the
/// field, and the only ones cleaning can provably restore). Type (a) welds
/// the pair's boundary timestamps and moves the second record to the nearest
/// other station; type (b) moves it to the farthest station when that
/// implies a speed above v_max. Ground-truth originals are returned for
/// recovery tests.
InjectionResult inject_anomalies(std::vector<UdrRecord> records, double rate,
                                 std::uint64_t seed,
                                 const CleanConfig& clean_cfg = {});

/// Accuracy of the Bayes-optimal one-step predictor under the persona's
/// generative law, computed by exact forward propagation of the state
/// distribution (no sampling). Non-decreasing in persona.regularity.
double bayes_accuracy(const SynthWorld& world, const Persona& persona,
                      std::size_t records_per_day, std::uint64_t seed,
                      std::size_t days = 8);

}  // namespace deepspace

#endif  // DEEPSPACE_SYNTH_HPP
