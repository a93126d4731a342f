#include "deepspace/geo.hpp"

#include <algorithm>
#include <cmath>

namespace deepspace {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

StationKey station_key(const GeoPoint& p) {
  return StationKey{static_cast<std::int64_t>(std::llround(p.longitude * 1e5)),
                    static_cast<std::int64_t>(std::llround(p.latitude * 1e5))};
}

GeoPoint key_to_point(const StationKey& k) {
  return GeoPoint{static_cast<double>(k.lon_e5) / 1e5,
                  static_cast<double>(k.lat_e5) / 1e5};
}

bool same_station(const GeoPoint& a, const GeoPoint& b) {
  return station_key(a) == station_key(b);
}

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.longitude) && std::isfinite(p.latitude) &&
         p.longitude >= -180.0 && p.longitude <= 180.0 && p.latitude >= -90.0 &&
         p.latitude <= 90.0;
}

double great_circle_distance(const GeoPoint& a, const GeoPoint& b,
                             const GeoConfig& cfg) {
  // Coincident points must come out exactly zero; the law-of-cosines
  // argument can round to just below 1 there, which clamping cannot fix.
  if (a.longitude == b.longitude && a.latitude == b.latitude) return 0.0;
  const double lat_a = a.latitude * kDegToRad;
  const double lat_b = b.latitude * kDegToRad;
  // fabs keeps the expression symmetric in (a, b) down to the last bit.
  const double dlon = std::fabs(b.longitude * kDegToRad - a.longitude * kDegToRad);
  double arg = std::cos(lat_a) * std::cos(lat_b) * std::cos(dlon) +
               std::sin(lat_a) * std::sin(lat_b);
  arg = std::clamp(arg, -1.0, 1.0);
  return cfg.earth_radius_km * std::acos(arg);
}

double travel_speed(double distance_km, Timestamp t_start, Timestamp t_end) {
  if (t_end <= t_start) {
    throw NonPositiveDuration("travel_speed: t_end must be after t_start");
  }
  const double hours = static_cast<double>(t_end - t_start) / 3600.0;
  return distance_km / hours;
}

}  // namespace deepspace
