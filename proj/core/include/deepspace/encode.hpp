#ifndef DEEPSPACE_ENCODE_HPP
#define DEEPSPACE_ENCODE_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deepspace/ingest.hpp"

namespace deepspace {

enum class Scale { coarse, fine };

const char* to_string(Scale scale);

/// A supervised instance: W historical position labels plus the next one.
struct Sample {
  std::vector<int> window;
  int target = 0;
  Scale scale = Scale::fine;
};

/// Bidirectional mapping between stations, fine labels {0..n-1}, LAC tokens
/// and coarse labels {0..n'-1}, plus the fine -> coarse partition.
///
/// Labels are assigned in first-appearance order, so the index is a pure
/// function of the input ordering. A station seen under several lacids is
/// parented to the lacid with the most occurrences (ties: first seen for
/// that station). Lacids that end up parenting no station are dropped from
/// the coarse space so every coarse label owns at least one fine label.
class StationIndex {
 public:
  /// Throws EmptyInput when the trajectories contain no points.
  static StationIndex build(const std::vector<Trajectory>& trajectories);

  int num_fine() const { return static_cast<int>(point_by_fine_.size()); }
  int num_coarse() const { return static_cast<int>(lacid_by_coarse_.size()); }

  /// Throws UnknownStation.
  int fine_label(const GeoPoint& p) const;
  bool has_station(const GeoPoint& p) const;

  int coarse_of(int fine) const { return coarse_by_fine_.at(fine); }
  const GeoPoint& point_of(int fine) const { return point_by_fine_.at(fine); }
  const std::string& lacid_of_coarse(int coarse) const {
    return lacid_by_coarse_.at(coarse);
  }

  /// Global fine labels owned by a coarse label, ascending.
  std::vector<int> fine_labels_of_coarse(int coarse) const;

  const std::vector<int>& fine_to_coarse() const { return coarse_by_fine_; }

  friend bool operator==(const StationIndex&, const StationIndex&) = default;

  // Used by the model-file serializer.
  static StationIndex from_parts(std::vector<GeoPoint> point_by_fine,
                                 std::vector<int> coarse_by_fine,
                                 std::vector<std::string> lacid_by_coarse);

 private:
  std::map<StationKey, int> fine_by_key_;
  std::vector<GeoPoint> point_by_fine_;
  std::vector<int> coarse_by_fine_;
  std::vector<std::string> lacid_by_coarse_;
};

/// One label per trajectory point, order preserved. Coarse labels are the
/// fine -> coarse projection of the station, not the record's raw lacid.
/// Throws UnknownStation for points absent from the index.
std::vector<int> encode_trajectory(const Trajectory& traj,
                                   const StationIndex& index, Scale scale);

/// Sliding windows with stride 1: max(0, len - W) samples.
std::vector<Sample> make_windows(const std::vector<int>& labels, std::size_t window_len,
                                 Scale scale);

/// Chronological split: first floor(fraction * len) samples are train.
std::pair<std::vector<Sample>, std::vector<Sample>> split_train_test(
    std::vector<Sample> samples, double train_fraction);

/// Buckets fine-encoded samples by the coarse label of their target.
/// Windows stay fine-encoded and global.
std::map<int, std::vector<Sample>> partition_by_coarse(
    const std::vector<Sample>& fine_samples, const StationIndex& index);

/// CSV persistence: header w_0..w_{W-1},target,scale then one row per sample.
void write_samples_csv(std::ostream& out, const std::vector<Sample>& samples);

}  // namespace deepspace

#endif  // DEEPSPACE_ENCODE_HPP
