#ifndef DEEPSPACE_EVAL_HPP
#define DEEPSPACE_EVAL_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "deepspace/hier.hpp"

namespace deepspace {

struct FineModelCount {
  std::size_t samples = 0;  ///< test samples whose true coarse label routes here
  std::size_t correct = 0;
};

/// The three accuracies of the evaluation protocol. fine_acc routes each
/// sample to the fine model of its TRUE coarse label (measuring the experts
/// in isolation); whole_acc routes by the coarse model's prediction.
/// whole_acc <= coarse_acc holds structurally: a correct final label is only
/// reachable through a correct route, because class sets partition labels.
struct Metrics {
  double coarse_acc = 0.0;
  double fine_acc = 0.0;
  double whole_acc = 0.0;
  std::size_t num_samples = 0;
  std::vector<FineModelCount> per_fine;
};

/// Throws EmptyTestSet.
Metrics evaluate(const HierModel& model, std::span<const StreamEvent> test);

/// Single-model argmax accuracy on fine windows. Throws EmptyTestSet.
double evaluate_flat(const CnnModel& model, std::span<const StreamEvent> test);

// ---------------------------------------------------------------------------
// Dataset assembly: trajectories -> chronological event stream.
// ---------------------------------------------------------------------------

constexpr double kDefaultTrainFraction = 19.0 / 23.0;

struct Dataset {
  StationIndex index;
  std::vector<StreamEvent> train;  ///< merged across users by target time
  std::vector<StreamEvent> test;
};

/// Builds the index over all trajectories, windows each user's label
/// sequences, splits per user chronologically, then merges each part across
/// users by target time (ties keep user order).
Dataset assemble_dataset(const std::vector<Trajectory>& trajectories,
                         std::size_t window_len, double train_fraction);

/// Same, encoding against an existing index (e.g. the one stored in a model
/// file). Stations absent from the index raise UnknownStation.
Dataset assemble_with_index(const std::vector<Trajectory>& trajectories,
                            StationIndex index, std::size_t window_len,
                            double train_fraction);

// ---------------------------------------------------------------------------
// Window-length sweep.
// ---------------------------------------------------------------------------

struct SweepRow {
  std::size_t window = 0;
  Metrics hier;
  double flat_acc = 0.0;
  bool has_flat = false;
};

/// Trains and evaluates one hierarchy per window length (and optionally the
/// flat baseline on the same stream). Throws SequenceTooShort when a window
/// length yields an empty train or test set.
std::vector<SweepRow> sweep_windows(const std::vector<Trajectory>& trajectories,
                                    std::span<const std::size_t> windows,
                                    const TrainConfig& cfg, bool with_flat,
                                    double train_fraction = kDefaultTrainFraction,
                                    CurveData* curves = nullptr);

/// Metrics table in the layout of the accuracy summary: one row per window
/// length. The header records the fine_acc routing convention.
void write_metrics_csv(std::ostream& out, std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// Predicted-vs-true path export.
// ---------------------------------------------------------------------------

struct PathRow {
  std::size_t t = 0;  ///< index of the predicted record within the trajectory
  GeoPoint truth;
  GeoPoint predicted;
};

/// One row per predictable record (trajectory length - W rows); predicted
/// labels are mapped back to coordinates through the index.
/// Throws SequenceTooShort when the trajectory has no full window, and
/// propagates UnknownStation.
std::vector<PathRow> export_paths(const HierModel& model, const Trajectory& traj,
                                  const StationIndex& index);
std::vector<PathRow> export_paths(const CnnModel& flat_model, const Trajectory& traj,
                                  const StationIndex& index);

void write_paths_csv(std::ostream& out, std::span<const PathRow> rows);

}  // namespace deepspace

#endif  // DEEPSPACE_EVAL_HPP
