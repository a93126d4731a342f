#ifndef DEEPSPACE_INGEST_HPP
#define DEEPSPACE_INGEST_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "deepspace/geo.hpp"
#include "deepspace/timeutil.hpp"

namespace deepspace {

/// One usage-detail record. host/appid/url are opaque and carried through
/// the pipeline untouched; the model never consumes them.
struct UdrRecord {
  std::string phonenum;
  Timestamp stime = 0;
  Timestamp etime = 0;
  std::string host;
  std::string appid;
  std::string url;
  std::string lacid;
  GeoPoint location;

  friend bool operator==(const UdrRecord& a, const UdrRecord& b);
};

struct CleanConfig {
  double v_max_kmh = 150.0;  ///< speed ceiling for the switching rule
  GeoConfig geo;
};

/// Per-user, time-ordered view of the record stream.
struct Trajectory {
  std::string user;
  std::vector<UdrRecord> points;
};

enum class RejectReason {
  FieldCountMismatch,
  EmptyRequiredField,
  BadTimestamp,
  BadCoordinate,
};

const char* to_string(RejectReason reason);

struct RejectedLine {
  std::size_t line_no = 0;  ///< 1-based, header is line 1
  RejectReason reason = RejectReason::FieldCountMismatch;
};

struct ParseResult {
  std::vector<UdrRecord> records;
  std::vector<RejectedLine> rejected;
};

/// Parses header + rows. Malformed rows land in `rejected` with their line
/// number; they are never silently dropped. Throws MissingHeader when one of
/// the six required columns is absent.
ParseResult parse_udr_csv(std::istream& in);

/// Removes exact duplicates and records violating stime <= etime or with an
/// empty required field. Keeps first occurrences; preserves order otherwise.
std::vector<UdrRecord> drop_dirty(std::vector<UdrRecord> records);

/// One trajectory per distinct phonenum (first-appearance order); points
/// sorted by stime, ties broken by etime then input order.
std::vector<Trajectory> group_and_sort(std::vector<UdrRecord> records);

/// Single left-to-right pass over consecutive pairs (i, j):
///   rule A: etime_i == stime_j with differing locations -> copy location
///           (and lacid) of i onto j;
///   rule B: otherwise, travel speed above cfg.v_max_kmh -> same copy.
/// A corrected j participates in the following (j, j+1) check, so one pass
/// leaves no violating pair behind.
Trajectory fix_switching(Trajectory traj, const CleanConfig& cfg);

/// drop_dirty -> group_and_sort -> fix_switching per trajectory.
std::vector<Trajectory> clean_pipeline(std::vector<UdrRecord> records,
                                       const CleanConfig& cfg);

/// Canonical coordinate text: fixed 5 decimal places.
std::string format_coordinate(double degrees);

void write_udr_csv(std::ostream& out, const std::vector<UdrRecord>& records);
void write_udr_csv(std::ostream& out, const std::vector<Trajectory>& trajectories);

}  // namespace deepspace

#endif  // DEEPSPACE_INGEST_HPP
