#include "deepspace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "deepspace/errors.hpp"

namespace deepspace {

namespace {

constexpr double kKmPerDegLat = 110.574;
constexpr double kKmPerDegLonEquator = 111.320;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr Timestamp kDaySeconds = 86400;

GeoPoint quantize(const GeoPoint& p) { return key_to_point(station_key(p)); }

GeoPoint offset_km(const GeoPoint& center, double east_km, double north_km) {
  const double dlat = north_km / kKmPerDegLat;
  const double dlon =
      east_km / (kKmPerDegLonEquator * std::cos(center.latitude * kDegToRad));
  return GeoPoint{center.longitude + dlon, center.latitude + dlat};
}

}  // namespace

std::size_t SynthWorld::num_stations() const {
  std::size_t total = 0;
  for (const auto& group : stations) total += group.size();
  return total;
}

std::size_t SynthWorld::lac_of_station(std::size_t global_id) const {
  for (std::size_t lac = 0; lac < stations.size(); ++lac) {
    if (global_id < stations[lac].size()) return lac;
    global_id -= stations[lac].size();
  }
  throw Error("lac_of_station: station id out of range");
}

std::size_t SynthWorld::local_of_station(std::size_t global_id) const {
  for (const auto& group : stations) {
    if (global_id < group.size()) return global_id;
    global_id -= group.size();
  }
  throw Error("local_of_station: station id out of range");
}

const GeoPoint& SynthWorld::station_point(std::size_t global_id) const {
  return stations[lac_of_station(global_id)][local_of_station(global_id)];
}

const std::string& SynthWorld::lacid_of_station(std::size_t global_id) const {
  return lac_ids[lac_of_station(global_id)];
}

SynthWorld generate_world(std::size_t n_lacs, std::size_t stations_per_lac,
                          const WorldConfig& cfg, std::uint64_t seed) {
  if (n_lacs == 0 || stations_per_lac == 0) {
    throw Error("generate_world: counts must be positive");
  }
  // Keep the scatter disc inside the box.
  const double margin_lat = cfg.scatter_radius_km / kKmPerDegLat * 1.5;
  const double margin_lon = cfg.scatter_radius_km /
                            (kKmPerDegLonEquator * std::cos(cfg.lat_max * kDegToRad)) *
                            1.5;
  if (cfg.lon_min + margin_lon >= cfg.lon_max - margin_lon ||
      cfg.lat_min + margin_lat >= cfg.lat_max - margin_lat) {
    throw BoxTooSmall("generate_world: box cannot hold the scatter radius");
  }

  SynthWorld world;
  world.config = cfg;
  Rng rng(seed);
  for (std::size_t lac = 0; lac < n_lacs; ++lac) {
    world.lac_centers.push_back(
        GeoPoint{rng.uniform(cfg.lon_min + margin_lon, cfg.lon_max - margin_lon),
                 rng.uniform(cfg.lat_min + margin_lat, cfg.lat_max - margin_lat)});
    world.lac_ids.push_back(std::to_string(1001 + lac));
  }

  std::set<StationKey> used;
  world.stations.resize(n_lacs);
  for (std::size_t lac = 0; lac < n_lacs; ++lac) {
    for (std::size_t s = 0; s < stations_per_lac; ++s) {
      GeoPoint placed;
      bool ok = false;
      for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
        // 0.98 keeps the quantized point inside the radius.
        const double r = 0.98 * cfg.scatter_radius_km * std::sqrt(rng.uniform());
        const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        placed = quantize(offset_km(world.lac_centers[lac], r * std::cos(theta),
                                    r * std::sin(theta)));
        ok = used.insert(station_key(placed)).second;
      }
      if (!ok) {
        throw BoxTooSmall("generate_world: could not place a distinct station");
      }
      world.stations[lac].push_back(placed);
    }
  }
  return world;
}

Persona make_persona(const SynthWorld& world, double regularity,
                     std::uint64_t seed) {
  const std::size_t n_lacs = world.num_lacs();
  const std::size_t n_stations = world.num_stations();
  Rng rng(seed);

  Persona persona;
  persona.regularity = regularity;
  persona.home = rng.uniform_int(n_stations);
  if (n_lacs > 1) {
    const std::size_t home_lac = world.lac_of_station(persona.home);
    const std::size_t work_lac =
        (home_lac + 1 + rng.uniform_int(n_lacs - 1)) % n_lacs;
    std::size_t base = 0;
    for (std::size_t lac = 0; lac < work_lac; ++lac) base += world.stations[lac].size();
    persona.work = base + rng.uniform_int(world.stations[work_lac].size());
  } else {
    persona.work = rng.uniform_int(n_stations);
  }

  persona.routine.resize(n_stations);
  for (std::size_t i = 0; i < n_stations; ++i) persona.routine[i] = i;

  persona.lac_transition.assign(
      n_lacs, std::vector<double>(n_lacs, 1.0 / static_cast<double>(n_lacs)));
  persona.station_transition.resize(n_lacs);
  for (std::size_t lac = 0; lac < n_lacs; ++lac) {
    const std::size_t k = world.stations[lac].size();
    persona.station_transition[lac].assign(
        k, std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }
  return persona;
}

namespace {

// The user's daily record rhythm: sorted arrival offsets within a day,
// drawn once and reused every day so a fully regular persona produces the
// same label sequence each day.
std::vector<double> daily_offsets(std::size_t records_per_day, const GenConfig& cfg,
                                  Rng& rng) {
  std::vector<double> offsets(records_per_day);
  for (double& v : offsets) v = rng.uniform(0.0, 86000.0);
  std::sort(offsets.begin(), offsets.end());
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    offsets[i] = std::max(offsets[i], offsets[i - 1] + cfg.min_gap_s);
  }
  return offsets;
}

std::size_t draw_from_row(const std::vector<double>& row, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    acc += row[i];
    if (u < acc) return i;
  }
  return row.size() - 1;
}

struct StationWalk {
  const SynthWorld& world;
  const Persona& persona;
  std::vector<std::size_t> lac_base;  // first global id per LAC

  explicit StationWalk(const SynthWorld& w, const Persona& p)
      : world(w), persona(p) {
    std::size_t base = 0;
    for (const auto& group : w.stations) {
      lac_base.push_back(base);
      base += group.size();
    }
  }

  // One noise transition: LAC from the chain, then a station inside it.
  std::size_t noise_step(std::size_t current, Rng& rng) const {
    const std::size_t cur_lac = world.lac_of_station(current);
    const std::size_t next_lac = draw_from_row(persona.lac_transition[cur_lac], rng);
    if (next_lac == cur_lac) {
      const std::size_t local = world.local_of_station(current);
      return lac_base[next_lac] +
             draw_from_row(persona.station_transition[next_lac][local], rng);
    }
    return lac_base[next_lac] + rng.uniform_int(world.stations[next_lac].size());
  }

  // Exact next-label distribution for the noise branch.
  void noise_distribution(std::size_t current, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t cur_lac = world.lac_of_station(current);
    const auto& lac_row = persona.lac_transition[cur_lac];
    for (std::size_t lac = 0; lac < world.num_lacs(); ++lac) {
      const std::size_t k = world.stations[lac].size();
      if (lac == cur_lac) {
        const std::size_t local = world.local_of_station(current);
        const auto& row = persona.station_transition[lac][local];
        for (std::size_t s = 0; s < k; ++s) {
          out[lac_base[lac] + s] += lac_row[lac] * row[s];
        }
      } else {
        for (std::size_t s = 0; s < k; ++s) {
          out[lac_base[lac] + s] += lac_row[lac] / static_cast<double>(k);
        }
      }
    }
  }
};

}  // namespace

std::vector<UdrRecord> generate_trajectory(const SynthWorld& world,
                                           const Persona& persona,
                                           const std::string& user,
                                           std::size_t days,
                                           std::size_t records_per_day,
                                           std::uint64_t seed,
                                           const GenConfig& cfg) {
  if (days < 1) throw Error("generate_trajectory: days must be >= 1");
  const std::size_t rpd = records_per_day > 0
                              ? records_per_day
                              : static_cast<std::size_t>(persona.mobility_rate);
  if (rpd == 0) throw Error("generate_trajectory: no records per day");
  if (persona.routine.empty()) throw Error("generate_trajectory: empty routine");

  Rng rng(seed);
  const auto offsets = daily_offsets(rpd, cfg, rng);
  const std::size_t period = persona.routine.size();
  const StationWalk walk(world, persona);

  std::vector<UdrRecord> records;
  records.reserve(days * rpd);
  std::size_t current = persona.home;
  Timestamp prev_etime = cfg.start_time - 1;

  for (std::size_t day = 0; day < days; ++day) {
    const Timestamp day_start = cfg.start_time + static_cast<Timestamp>(day) * kDaySeconds;
    for (std::size_t r = 0; r < rpd; ++r) {
      const std::size_t slot =
          std::min(period - 1, static_cast<std::size_t>(offsets[r] *
                                                        static_cast<double>(period) /
                                                        86400.0));
      const std::size_t next = rng.uniform() < persona.regularity
                                   ? persona.routine[slot]
                                   : walk.noise_step(current, rng);

      // Coverage-overlap flap: the log may show a neighboring station of the
      // same LAC while the user is not moving at all.
      std::size_t observed = next;
      if (cfg.station_flap > 0.0 && rng.bernoulli(cfg.station_flap)) {
        const std::size_t lac = world.lac_of_station(next);
        const std::size_t k = world.stations[lac].size();
        if (k > 1) {
          const std::size_t local = world.local_of_station(next);
          const std::size_t shifted = 1 + rng.uniform_int(k - 1);
          observed = walk.lac_base[lac] + (local + shifted) % k;
        }
      }

      // Moves get a travel-time floor so no recorded pair implies a speed
      // above cfg.v_travel_kmh.
      Timestamp min_start = prev_etime + 1;
      if (!records.empty()) {
        const GeoPoint& prev_loc = records.back().location;
        const GeoPoint& cur_loc = world.station_point(observed);
        if (!same_station(prev_loc, cur_loc)) {
          const double dist =
              great_circle_distance(prev_loc, cur_loc, world.config.geo);
          min_start =
              prev_etime + std::max<Timestamp>(
                               1, static_cast<Timestamp>(
                                      std::ceil(3600.0 * dist / cfg.v_travel_kmh)));
        }
      }
      const Timestamp stime =
          std::max(day_start + static_cast<Timestamp>(offsets[r]), min_start);
      const Timestamp session = 1 + static_cast<Timestamp>(rng.uniform_int(
                                        static_cast<std::uint64_t>(cfg.session_max_s)));

      UdrRecord rec;
      rec.phonenum = user;
      rec.stime = stime;
      rec.etime = stime + session;
      rec.host = "portal.example";
      rec.appid = "app01";
      rec.url = "http://portal.example/session";
      rec.lacid = world.lacid_of_station(observed);
      rec.location = world.station_point(observed);
      records.push_back(std::move(rec));

      current = next;
      prev_etime = records.back().etime;
    }
  }
  return records;
}

InjectionResult inject_anomalies(std::vector<UdrRecord> records, double rate,
                                 std::uint64_t seed, const CleanConfig& clean_cfg) {
  InjectionResult result;
  if (records.size() < 2 || rate <= 0.0) {
    result.records = std::move(records);
    return result;
  }

  // Candidate wrong stations: every distinct station in the stream, with the
  // lacid it first appeared under.
  struct Station {
    GeoPoint point;
    std::string lacid;
  };
  std::vector<Station> stations;
  {
    std::set<StationKey> seen;
    for (const auto& rec : records) {
      if (seen.insert(station_key(rec.location)).second) {
        stations.push_back({rec.location, rec.lacid});
      }
    }
  }

  Rng rng(seed);
  std::vector<bool> tainted(records.size(), false);
  for (std::size_t j = 1; j < records.size(); ++j) {
    UdrRecord& prev = records[j - 1];
    UdrRecord& cur = records[j];
    // Only stationary pairs of untouched records model the switching
    // phenomenon: the user did not move, the log did. These are also the
    // pairs cleaning can restore.
    if (tainted[j - 1] || tainted[j]) continue;
    if (!same_station(prev.location, cur.location)) continue;
    if (!rng.bernoulli(rate)) continue;

    const StationKey here = station_key(cur.location);
    const Station* nearest = nullptr;
    const Station* farthest = nullptr;
    double near_d = 0.0, far_d = 0.0;
    for (const auto& st : stations) {
      if (station_key(st.point) == here) continue;
      const double d =
          great_circle_distance(cur.location, st.point, clean_cfg.geo);
      if (nearest == nullptr || d < near_d) {
        nearest = &st;
        near_d = d;
      }
      if (farthest == nullptr || d > far_d) {
        farthest = &st;
        far_d = d;
      }
    }
    if (nearest == nullptr) continue;  // single-station stream

    bool type_b = rng.bernoulli(0.5);
    if (type_b) {
      // The far station must imply a speed clearly above the ceiling.
      const Timestamp gap = std::max<Timestamp>(1, cur.stime - prev.etime);
      const double speed = far_d / (static_cast<double>(gap) / 3600.0);
      if (speed <= 1.5 * clean_cfg.v_max_kmh) type_b = false;
    }

    result.truth.push_back({j, cur.location, cur.lacid});
    tainted[j - 1] = true;
    tainted[j] = true;
    if (type_b) {
      cur.location = farthest->point;
      cur.lacid = farthest->lacid;
    } else {
      prev.etime = cur.stime;
      cur.location = nearest->point;
      cur.lacid = nearest->lacid;
    }
  }
  result.records = std::move(records);
  return result;
}

double bayes_accuracy(const SynthWorld& world, const Persona& persona,
                      std::size_t records_per_day, std::uint64_t seed,
                      std::size_t days) {
  const std::size_t n = world.num_stations();
  const std::size_t period = persona.routine.size();
  Rng rng(seed);
  const GenConfig cfg;
  const auto offsets = daily_offsets(records_per_day, cfg, rng);

  const StationWalk walk(world, persona);
  std::vector<double> state(n, 0.0);
  state[persona.home] = 1.0;

  std::vector<double> noise(n), next_state(n), mixture(n);
  const std::size_t burn_days = days > 2 ? 2 : 0;
  double acc_sum = 0.0;
  std::size_t acc_count = 0;

  for (std::size_t day = 0; day < days; ++day) {
    for (std::size_t r = 0; r < records_per_day; ++r) {
      const std::size_t slot =
          std::min(period - 1, static_cast<std::size_t>(offsets[r] *
                                                        static_cast<double>(period) /
                                                        86400.0));
      const std::size_t routine_label = persona.routine[slot];
      std::fill(next_state.begin(), next_state.end(), 0.0);
      double step_acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        if (state[s] == 0.0) continue;
        walk.noise_distribution(s, noise);
        double best = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
          double p = (1.0 - persona.regularity) * noise[l];
          if (l == routine_label) p += persona.regularity;
          mixture[l] = p;
          best = std::max(best, p);
        }
        step_acc += state[s] * best;
        for (std::size_t l = 0; l < n; ++l) next_state[l] += state[s] * mixture[l];
      }
      state.swap(next_state);
      if (day >= burn_days) {
        acc_sum += step_acc;
        ++acc_count;
      }
    }
  }
  return acc_count > 0 ? acc_sum / static_cast<double>(acc_count) : 0.0;
}

}  // namespace deepspace
