#ifndef DEEPSPACE_GEO_HPP
#define DEEPSPACE_GEO_HPP

#include <cstdint>

#include "deepspace/errors.hpp"
#include "deepspace/timeutil.hpp"

namespace deepspace {

/// A base-station position in decimal degrees.
struct GeoPoint {
  double longitude = 0.0;  ///< degrees east, [-180, 180]
  double latitude = 0.0;   ///< degrees north, [-90, 90]

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct GeoConfig {
  double earth_radius_km = 6371.0;
};

/// Station identity: coordinates quantized to 5 decimal places, which is the
/// precision carried by the record format. Comparing keys instead of raw
/// doubles makes station equality robust across parse/format round trips.
struct StationKey {
  std::int64_t lon_e5 = 0;
  std::int64_t lat_e5 = 0;

  friend bool operator==(const StationKey&, const StationKey&) = default;
  friend auto operator<=>(const StationKey&, const StationKey&) = default;
};

StationKey station_key(const GeoPoint& p);

/// Exact GeoPoint for a key (the canonical 5-decimal coordinate).
GeoPoint key_to_point(const StationKey& k);

bool same_station(const GeoPoint& a, const GeoPoint& b);

bool is_valid(const GeoPoint& p);

/// Great-circle distance via the spherical law of cosines, in kilometers.
/// The arccos argument is clamped to [-1, 1] to absorb floating-point
/// overshoot near coincident points.
double great_circle_distance(const GeoPoint& a, const GeoPoint& b,
                             const GeoConfig& cfg = {});

/// Travel speed in km/h between two timestamps. Throws NonPositiveDuration
/// when t_end <= t_start; the caller is expected to handle equal-timestamp
/// record pairs before asking for a speed.
double travel_speed(double distance_km, Timestamp t_start, Timestamp t_end);

}  // namespace deepspace

#endif  // DEEPSPACE_GEO_HPP
