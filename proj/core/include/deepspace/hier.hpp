#ifndef DEEPSPACE_HIER_HPP
#define DEEPSPACE_HIER_HPP

#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "deepspace/encode.hpp"
#include "deepspace/nn.hpp"

namespace deepspace {

/// One unit of the training/evaluation stream: the same W-record history
/// under both encodings, plus the next-position targets.
struct StreamEvent {
  std::string user;
  std::vector<int> fine_window;
  std::vector<int> coarse_window;
  int fine_target = 0;
  int coarse_target = 0;   ///< always fine_to_coarse(fine_target)
  Timestamp target_time = 0;  ///< stime of the target record, for stream order
};

/// Coarse router plus one fine expert per coarse label. Fine models consume
/// globally fine-encoded windows but classify only over their own label
/// subset; the class sets partition {0..n-1}.
struct HierModel {
  CnnModel coarse;
  std::vector<CnnModel> fines;                 ///< indexed by coarse label
  std::vector<std::vector<int>> fine_classes;  ///< global labels per fine, ascending
  std::vector<int> fine_to_coarse;             ///< routing table
  std::vector<int> local_of_fine;              ///< global fine -> class index
  std::size_t window = 0;

  friend bool operator==(const HierModel&, const HierModel&) = default;
};

/// Builds the hierarchy from an index: coarse model over n' classes with
/// coarse-channel input; one fine model per coarse label. Sub-model seeds
/// are derived deterministically from cfg.seed and the model slot.
/// Throws EmptyIndex.
HierModel build_hier_model(const StationIndex& index, const TrainConfig& cfg);

/// Fine model identifier for a coarse label. Throws UnknownCoarseLabel.
std::size_t route(const HierModel& model, int coarse_label);

struct Prediction {
  int fine = 0;
  int coarse = 0;
};

/// Coarse prediction = argmax of the coarse model; the predicted coarse
/// label selects the fine model whose argmax (reported as a global label)
/// is the final prediction. Ties break toward the lowest label.
Prediction predict(const HierModel& model, std::span<const int> fine_window,
                   std::span<const int> coarse_window);

// ---------------------------------------------------------------------------
// Training curves (accuracy/loss vs. iterations, per sub-model).
// ---------------------------------------------------------------------------

struct CurvePoint {
  std::string model_id;
  std::size_t iteration = 0;  ///< 1-based batch counter per model
  double mean_loss = 0.0;
  double running_accuracy = 0.0;  ///< over a sliding 100-batch window
};

class CurveTrack {
 public:
  explicit CurveTrack(std::string model_id) : model_id_(std::move(model_id)) {}

  void add(const BatchStats& stats);
  const std::vector<CurvePoint>& points() const { return points_; }

 private:
  std::string model_id_;
  std::size_t iteration_ = 0;
  std::deque<BatchStats> window_;
  std::size_t window_correct_ = 0;
  std::size_t window_count_ = 0;
  std::vector<CurvePoint> points_;
};

struct CurveData {
  std::vector<CurvePoint> rows;  ///< grouped by model, iterations ascending
};

void write_curves_csv(std::ostream& out, const CurveData& curves);

// ---------------------------------------------------------------------------
// Online training.
// ---------------------------------------------------------------------------

/// Streaming trainer. Events are micro-batched per destination model; the
/// coarse model consumes every event, each fine model only its routed subset
/// (routed by the event's true coarse target). Feeding a stream in chunks
/// through one trainer is bit-identical to feeding it in one call, so a
/// caller may pause and resume at any event boundary.
class OnlineTrainer {
 public:
  OnlineTrainer(HierModel& model, const TrainConfig& cfg);

  void feed(const StreamEvent& event);
  void feed(std::span<const StreamEvent> events);

  /// Flushes partial batches (end of a pass).
  void finish();

  std::size_t events_consumed() const { return events_consumed_; }

  CurveData curves() const;

 private:
  void flush_coarse();
  void flush_fine(std::size_t idx);

  HierModel& model_;
  TrainConfig cfg_;
  std::vector<Sample> coarse_buf_;
  std::vector<std::vector<Sample>> fine_bufs_;
  CurveTrack coarse_track_;
  std::vector<CurveTrack> fine_tracks_;
  std::size_t events_consumed_ = 0;
};

/// One pass over the stream (feed everything, then flush).
void train_online(std::span<const StreamEvent> events, HierModel& model,
                  const TrainConfig& cfg, CurveData* curves = nullptr);

/// Same contract, but fine models are updated concurrently (one worker per
/// sub-model, per-model event order preserved). Bit-identical to the
/// sequential pass.
void train_online_parallel(std::span<const StreamEvent> events, HierModel& model,
                           const TrainConfig& cfg, CurveData* curves = nullptr);

/// Vanilla single-model baseline trained on the same stream (fine windows,
/// global fine targets).
void train_flat_online(std::span<const StreamEvent> events, CnnModel& model,
                       const TrainConfig& cfg, CurveData* curves = nullptr);

// ---------------------------------------------------------------------------
// Model files (versioned container, magic "DSPACE1").
// ---------------------------------------------------------------------------

enum class ModelKind : std::uint8_t { hierarchical = 0, flat = 1 };

struct SavedModel {
  ModelKind kind = ModelKind::hierarchical;
  StationIndex index;
  TrainConfig cfg;
  HierModel hier;  ///< valid when kind == hierarchical
  CnnModel flat;   ///< valid when kind == flat
};

/// Round-trips are bit-exact for all parameters, routing and config.
void save_model(const SavedModel& model, const std::string& path);

/// Throws VersionMismatch on a foreign magic/version, CorruptFile on
/// truncated or trailing bytes.
SavedModel load_model(const std::string& path);

void save_model(const SavedModel& model, std::ostream& out);
SavedModel load_model(std::istream& in);

}  // namespace deepspace

#endif  // DEEPSPACE_HIER_HPP
