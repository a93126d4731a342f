#include "deepspace/encode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "deepspace/errors.hpp"

namespace deepspace {

const char* to_string(Scale scale) {
  return scale == Scale::fine ? "fine" : "coarse";
}

StationIndex StationIndex::build(const std::vector<Trajectory>& trajectories) {
  StationIndex index;

  // First-appearance fine labels, plus per-station lacid occurrence counts.
  struct LacidCount {
    std::string lacid;
    std::size_t count = 0;
  };
  std::vector<std::vector<LacidCount>> lacids_by_fine;  // first-seen order

  for (const auto& traj : trajectories) {
    for (const auto& rec : traj.points) {
      const StationKey key = station_key(rec.location);
      auto [it, inserted] = index.fine_by_key_.emplace(
          key, static_cast<int>(index.point_by_fine_.size()));
      if (inserted) {
        index.point_by_fine_.push_back(rec.location);
        lacids_by_fine.emplace_back();
      }
      auto& counts = lacids_by_fine[it->second];
      auto hit = std::find_if(counts.begin(), counts.end(),
                              [&](const LacidCount& c) { return c.lacid == rec.lacid; });
      if (hit == counts.end()) {
        counts.push_back({rec.lacid, 1});
      } else {
        ++hit->count;
      }
    }
  }
  if (index.point_by_fine_.empty()) {
    throw EmptyInput("build_station_index: no points");
  }

  // Parent lacid per station: most occurrences, ties to the first seen.
  std::vector<std::string> parent_of_fine(index.point_by_fine_.size());
  for (std::size_t fine = 0; fine < lacids_by_fine.size(); ++fine) {
    const auto& counts = lacids_by_fine[fine];
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
      if (counts[i].count > counts[best].count) best = i;
    }
    parent_of_fine[fine] = counts[best].lacid;
  }

  // Coarse labels in first-appearance order of the parenting lacids.
  std::map<std::string, int> coarse_by_lacid;
  index.coarse_by_fine_.resize(parent_of_fine.size());
  for (std::size_t fine = 0; fine < parent_of_fine.size(); ++fine) {
    const auto [it, inserted] = coarse_by_lacid.emplace(
        parent_of_fine[fine], static_cast<int>(index.lacid_by_coarse_.size()));
    if (inserted) {
      index.lacid_by_coarse_.push_back(parent_of_fine[fine]);
    }
    index.coarse_by_fine_[fine] = it->second;
  }
  return index;
}

StationIndex StationIndex::from_parts(std::vector<GeoPoint> point_by_fine,
                                      std::vector<int> coarse_by_fine,
                                      std::vector<std::string> lacid_by_coarse) {
  StationIndex index;
  index.point_by_fine_ = std::move(point_by_fine);
  index.coarse_by_fine_ = std::move(coarse_by_fine);
  index.lacid_by_coarse_ = std::move(lacid_by_coarse);
  for (std::size_t fine = 0; fine < index.point_by_fine_.size(); ++fine) {
    index.fine_by_key_.emplace(station_key(index.point_by_fine_[fine]),
                               static_cast<int>(fine));
  }
  return index;
}

int StationIndex::fine_label(const GeoPoint& p) const {
  const auto it = fine_by_key_.find(station_key(p));
  if (it == fine_by_key_.end()) {
    throw UnknownStation("fine_label: station (" + std::to_string(p.longitude) +
                         ", " + std::to_string(p.latitude) + ") not in index");
  }
  return it->second;
}

bool StationIndex::has_station(const GeoPoint& p) const {
  return fine_by_key_.count(station_key(p)) != 0;
}

std::vector<int> StationIndex::fine_labels_of_coarse(int coarse) const {
  std::vector<int> labels;
  for (std::size_t fine = 0; fine < coarse_by_fine_.size(); ++fine) {
    if (coarse_by_fine_[fine] == coarse) labels.push_back(static_cast<int>(fine));
  }
  return labels;
}

std::vector<int> encode_trajectory(const Trajectory& traj,
                                   const StationIndex& index, Scale scale) {
  std::vector<int> labels;
  labels.reserve(traj.points.size());
  for (const auto& rec : traj.points) {
    const int fine = index.fine_label(rec.location);
    labels.push_back(scale == Scale::fine ? fine : index.coarse_of(fine));
  }
  return labels;
}

std::vector<Sample> make_windows(const std::vector<int>& labels,
                                 std::size_t window_len, Scale scale) {
  if (window_len < 1) {
    throw Error("make_windows: window length must be >= 1");
  }
  std::vector<Sample> samples;
  if (labels.size() <= window_len) return samples;
  samples.reserve(labels.size() - window_len);
  for (std::size_t t = window_len; t < labels.size(); ++t) {
    Sample s;
    s.window.assign(labels.begin() + (t - window_len), labels.begin() + t);
    s.target = labels[t];
    s.scale = scale;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_train_test(
    std::vector<Sample> samples, double train_fraction) {
  const auto cut = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(samples.size())));
  std::vector<Sample> test(samples.begin() + std::min(cut, samples.size()),
                           samples.end());
  samples.resize(std::min(cut, samples.size()));
  return {std::move(samples), std::move(test)};
}

std::map<int, std::vector<Sample>> partition_by_coarse(
    const std::vector<Sample>& fine_samples, const StationIndex& index) {
  std::map<int, std::vector<Sample>> buckets;
  for (const auto& sample : fine_samples) {
    buckets[index.coarse_of(sample.target)].push_back(sample);
  }
  return buckets;
}

void write_samples_csv(std::ostream& out, const std::vector<Sample>& samples) {
  if (samples.empty()) {
    out << "target,scale\n";
    return;
  }
  const std::size_t w = samples.front().window.size();
  for (std::size_t i = 0; i < w; ++i) {
    out << 'w' << '_' << i << ',';
  }
  out << "target,scale\n";
  for (const auto& sample : samples) {
    for (int label : sample.window) out << label << ',';
    out << sample.target << ',' << to_string(sample.scale) << '\n';
  }
}

}  // namespace deepspace
