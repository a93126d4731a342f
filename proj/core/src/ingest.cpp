#include "deepspace/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

namespace deepspace {

bool operator==(const UdrRecord& a, const UdrRecord& b) {
  return a.phonenum == b.phonenum && a.stime == b.stime && a.etime == b.etime &&
         a.host == b.host && a.appid == b.appid && a.url == b.url &&
         a.lacid == b.lacid && a.location.longitude == b.location.longitude &&
         a.location.latitude == b.location.latitude;
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::FieldCountMismatch: return "FieldCountMismatch";
    case RejectReason::EmptyRequiredField: return "EmptyRequiredField";
    case RejectReason::BadTimestamp: return "BadTimestamp";
    case RejectReason::BadCoordinate: return "BadCoordinate";
  }
  return "Unknown";
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string trim(std::string s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  return s.substr(i);
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc{} && result.ptr == end;
}

}  // namespace

ParseResult parse_udr_csv(std::istream& in) {
  static const char* kRequired[] = {"phonenum", "stime", "etime",
                                    "lacid",    "longitude", "latitude"};

  std::string line;
  if (!std::getline(in, line)) {
    throw MissingHeader("parse_udr_csv: empty input, no header row");
  }
  std::map<std::string, std::size_t> column_of;
  const std::size_t header_width = [&] {
    const auto header = split_csv(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
      column_of.emplace(trim(header[i]), i);
    }
    for (const char* name : kRequired) {
      if (!column_of.count(name)) {
        throw MissingHeader(std::string("parse_udr_csv: header lacks required column '") +
                            name + "'");
      }
    }
    return header.size();
  }();

  const auto get = [&](const std::vector<std::string>& fields,
                       const char* name) -> const std::string* {
    const auto it = column_of.find(name);
    if (it == column_of.end() || it->second >= fields.size()) return nullptr;
    return &fields[it->second];
  };

  ParseResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_csv(line);
    if (fields.size() != header_width) {
      result.rejected.push_back({line_no, RejectReason::FieldCountMismatch});
      continue;
    }

    UdrRecord rec;
    bool empty_required = false;
    for (const char* name : kRequired) {
      const std::string* value = get(fields, name);
      if (value == nullptr || trim(*value).empty()) {
        empty_required = true;
        break;
      }
    }
    if (empty_required) {
      result.rejected.push_back({line_no, RejectReason::EmptyRequiredField});
      continue;
    }

    rec.phonenum = trim(*get(fields, "phonenum"));
    rec.lacid = trim(*get(fields, "lacid"));
    for (const char* name : {"host", "appid", "url"}) {
      if (const std::string* value = get(fields, name)) {
        (name[0] == 'h' ? rec.host : name[0] == 'a' ? rec.appid : rec.url) =
            trim(*value);
      }
    }

    const auto stime = parse_timestamp(trim(*get(fields, "stime")));
    const auto etime = parse_timestamp(trim(*get(fields, "etime")));
    if (!stime || !etime) {
      result.rejected.push_back({line_no, RejectReason::BadTimestamp});
      continue;
    }
    rec.stime = *stime;
    rec.etime = *etime;

    double lon = 0.0, lat = 0.0;
    if (!parse_double(trim(*get(fields, "longitude")), lon) ||
        !parse_double(trim(*get(fields, "latitude")), lat)) {
      result.rejected.push_back({line_no, RejectReason::BadCoordinate});
      continue;
    }
    rec.location = GeoPoint{lon, lat};
    if (!is_valid(rec.location)) {
      result.rejected.push_back({line_no, RejectReason::BadCoordinate});
      continue;
    }

    result.records.push_back(std::move(rec));
  }
  return result;
}

std::vector<UdrRecord> drop_dirty(std::vector<UdrRecord> records) {
  std::vector<UdrRecord> kept;
  kept.reserve(records.size());
  // Exact-duplicate detection over all nine fields.
  std::set<std::tuple<std::string, Timestamp, Timestamp, std::string, std::string,
                      std::string, std::string, double, double>>
      seen;
  for (auto& rec : records) {
    if (rec.stime > rec.etime) continue;
    if (rec.phonenum.empty() || rec.lacid.empty()) continue;
    if (!is_valid(rec.location)) continue;
    auto key = std::make_tuple(rec.phonenum, rec.stime, rec.etime, rec.host,
                               rec.appid, rec.url, rec.lacid,
                               rec.location.longitude, rec.location.latitude);
    if (!seen.insert(std::move(key)).second) continue;
    kept.push_back(std::move(rec));
  }
  return kept;
}

std::vector<Trajectory> group_and_sort(std::vector<UdrRecord> records) {
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::size_t> slot_of_user;
  for (auto& rec : records) {
    const auto [it, inserted] =
        slot_of_user.emplace(rec.phonenum, trajectories.size());
    if (inserted) {
      trajectories.push_back(Trajectory{rec.phonenum, {}});
    }
    trajectories[it->second].points.push_back(std::move(rec));
  }
  for (auto& traj : trajectories) {
    std::stable_sort(traj.points.begin(), traj.points.end(),
                     [](const UdrRecord& a, const UdrRecord& b) {
                       return std::tie(a.stime, a.etime) < std::tie(b.stime, b.etime);
                     });
  }
  return trajectories;
}

Trajectory fix_switching(Trajectory traj, const CleanConfig& cfg) {
  for (std::size_t j = 1; j < traj.points.size(); ++j) {
    const UdrRecord& prev = traj.points[j - 1];
    UdrRecord& cur = traj.points[j];
    const bool moved = !same_station(prev.location, cur.location);
    if (!moved) continue;

    bool rewrite = false;
    if (prev.etime == cur.stime) {
      rewrite = true;  // rule A: same boundary instant, two places
    } else {
      // Rule B. Overlapping records (cur starts before prev ends) have no
      // positive gap; they are rule-A-exempt and checked with a 1 s floor.
      const Timestamp gap = std::max<Timestamp>(1, cur.stime - prev.etime);
      const double distance =
          great_circle_distance(prev.location, cur.location, cfg.geo);
      const double speed = travel_speed(distance, 0, gap);
      rewrite = speed > cfg.v_max_kmh;
    }
    if (rewrite) {
      cur.location = prev.location;
      cur.lacid = prev.lacid;
    }
  }
  return traj;
}

std::vector<Trajectory> clean_pipeline(std::vector<UdrRecord> records,
                                       const CleanConfig& cfg) {
  auto trajectories = group_and_sort(drop_dirty(std::move(records)));
  for (auto& traj : trajectories) {
    traj = fix_switching(std::move(traj), cfg);
  }
  return trajectories;
}

std::string format_coordinate(double degrees) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5f", degrees);
  return buf;
}

namespace {

void write_record(std::ostream& out, const UdrRecord& rec) {
  out << rec.phonenum << ',' << format_timestamp(rec.stime) << ','
      << format_timestamp(rec.etime) << ',' << rec.host << ',' << rec.appid << ','
      << rec.url << ',' << rec.lacid << ',' << format_coordinate(rec.location.longitude)
      << ',' << format_coordinate(rec.location.latitude) << '\n';
}

constexpr const char* kCsvHeader =
    "phonenum,stime,etime,host,appid,url,lacid,longitude,latitude\n";

}  // namespace

void write_udr_csv(std::ostream& out, const std::vector<UdrRecord>& records) {
  out << kCsvHeader;
  for (const auto& rec : records) write_record(out, rec);
}

void write_udr_csv(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  out << kCsvHeader;
  for (const auto& traj : trajectories) {
    for (const auto& rec : traj.points) write_record(out, rec);
  }
}

}  // namespace deepspace
