#include "deepspace/hier.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "deepspace/rng.hpp"

namespace deepspace {

namespace {

std::uint64_t submodel_seed(std::uint64_t base, std::size_t slot) {
  return base ^ mix_seed(0xD5AC'E000 + slot);
}

}  // namespace

HierModel build_hier_model(const StationIndex& index, const TrainConfig& cfg) {
  const int n_fine = index.num_fine();
  const int n_coarse = index.num_coarse();
  if (n_fine < 1 || n_coarse < 1) {
    throw EmptyIndex("build_hier_model: index has no labels");
  }

  HierModel model;
  model.window = cfg.window;
  model.fine_to_coarse = index.fine_to_coarse();
  model.coarse = init_model(static_cast<std::size_t>(n_coarse),
                            static_cast<std::size_t>(n_coarse), cfg,
                            submodel_seed(cfg.seed, 0));
  model.local_of_fine.assign(n_fine, -1);
  for (int coarse = 0; coarse < n_coarse; ++coarse) {
    auto classes = index.fine_labels_of_coarse(coarse);
    for (std::size_t local = 0; local < classes.size(); ++local) {
      model.local_of_fine[classes[local]] = static_cast<int>(local);
    }
    model.fines.push_back(init_model(static_cast<std::size_t>(n_fine),
                                     classes.size(), cfg,
                                     submodel_seed(cfg.seed, 1 + coarse)));
    model.fine_classes.push_back(std::move(classes));
  }
  return model;
}

std::size_t route(const HierModel& model, int coarse_label) {
  if (coarse_label < 0 ||
      static_cast<std::size_t>(coarse_label) >= model.fines.size()) {
    throw UnknownCoarseLabel("route: coarse label " + std::to_string(coarse_label) +
                             " outside [0, " + std::to_string(model.fines.size()) +
                             ")");
  }
  return static_cast<std::size_t>(coarse_label);
}

Prediction predict(const HierModel& model, std::span<const int> fine_window,
                   std::span<const int> coarse_window) {
  const ForwardCache coarse_fwd = forward_window(model.coarse, coarse_window);
  Prediction pred;
  pred.coarse = argmax_label(coarse_fwd.probs);
  const CnnModel& fine = model.fines[route(model, pred.coarse)];
  const ForwardCache fine_fwd = forward_window(fine, fine_window);
  pred.fine = model.fine_classes[pred.coarse][argmax_label(fine_fwd.probs)];
  return pred;
}

// ---------------------------------------------------------------------------
// Curves.
// ---------------------------------------------------------------------------

void CurveTrack::add(const BatchStats& stats) {
  ++iteration_;
  window_.push_back(stats);
  window_correct_ += stats.correct;
  window_count_ += stats.count;
  while (window_.size() > 100) {
    window_correct_ -= window_.front().correct;
    window_count_ -= window_.front().count;
    window_.pop_front();
  }
  CurvePoint point;
  point.model_id = model_id_;
  point.iteration = iteration_;
  point.mean_loss = stats.mean_loss;
  point.running_accuracy = window_count_ > 0
                               ? static_cast<double>(window_correct_) /
                                     static_cast<double>(window_count_)
                               : 0.0;
  points_.push_back(std::move(point));
}

void write_curves_csv(std::ostream& out, const CurveData& curves) {
  out << "model_id,iteration,mean_loss,running_accuracy\n";
  char buf[64];
  for (const auto& row : curves.rows) {
    std::snprintf(buf, sizeof buf, ",%zu,%.9g,%.6f", row.iteration, row.mean_loss,
                  row.running_accuracy);
    out << row.model_id << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Online training.
// ---------------------------------------------------------------------------

OnlineTrainer::OnlineTrainer(HierModel& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), coarse_track_("coarse") {
  fine_bufs_.resize(model.fines.size());
  for (std::size_t i = 0; i < model.fines.size(); ++i) {
    fine_tracks_.emplace_back("fine_" + std::to_string(i));
  }
}

void OnlineTrainer::feed(const StreamEvent& event) {
  const std::size_t target_model = route(model_, event.coarse_target);
  if (event.fine_target < 0 ||
      static_cast<std::size_t>(event.fine_target) >= model_.local_of_fine.size() ||
      model_.fine_to_coarse[event.fine_target] != event.coarse_target) {
    throw LabelOutOfRange("OnlineTrainer: event targets disagree with routing");
  }

  Sample coarse_sample;
  coarse_sample.window = event.coarse_window;
  coarse_sample.target = event.coarse_target;
  coarse_sample.scale = Scale::coarse;
  coarse_buf_.push_back(std::move(coarse_sample));
  if (coarse_buf_.size() >= cfg_.batch_size) flush_coarse();

  Sample fine_sample;
  fine_sample.window = event.fine_window;
  fine_sample.target = model_.local_of_fine[event.fine_target];
  fine_sample.scale = Scale::fine;
  fine_bufs_[target_model].push_back(std::move(fine_sample));
  if (fine_bufs_[target_model].size() >= cfg_.batch_size) flush_fine(target_model);

  ++events_consumed_;
}

void OnlineTrainer::feed(std::span<const StreamEvent> events) {
  for (const auto& event : events) feed(event);
}

void OnlineTrainer::finish() {
  flush_coarse();
  for (std::size_t i = 0; i < fine_bufs_.size(); ++i) flush_fine(i);
}

void OnlineTrainer::flush_coarse() {
  if (coarse_buf_.empty()) return;
  coarse_track_.add(train_step(model_.coarse, coarse_buf_, cfg_.learning_rate));
  coarse_buf_.clear();
}

void OnlineTrainer::flush_fine(std::size_t idx) {
  if (fine_bufs_[idx].empty()) return;
  fine_tracks_[idx].add(
      train_step(model_.fines[idx], fine_bufs_[idx], cfg_.learning_rate));
  fine_bufs_[idx].clear();
}

CurveData OnlineTrainer::curves() const {
  CurveData data;
  for (const auto& point : coarse_track_.points()) data.rows.push_back(point);
  for (const auto& track : fine_tracks_) {
    for (const auto& point : track.points()) data.rows.push_back(point);
  }
  return data;
}

void train_online(std::span<const StreamEvent> events, HierModel& model,
                  const TrainConfig& cfg, CurveData* curves) {
  OnlineTrainer trainer(model, cfg);
  for (std::size_t epoch = 0; epoch < std::max<std::size_t>(1, cfg.epochs); ++epoch) {
    trainer.feed(events);
    trainer.finish();
  }
  if (curves != nullptr) *curves = trainer.curves();
}

void train_online_parallel(std::span<const StreamEvent> events, HierModel& model,
                           const TrainConfig& cfg, CurveData* curves) {
  const std::size_t epochs = std::max<std::size_t>(1, cfg.epochs);
  const std::size_t n_fine = model.fines.size();

  // Per-model sample queues in stream order; each sub-model is then a fully
  // independent sequential consumer.
  std::vector<Sample> coarse_queue;
  std::vector<std::vector<Sample>> fine_queues(n_fine);
  for (const auto& event : events) {
    const std::size_t target_model = route(model, event.coarse_target);
    coarse_queue.push_back(
        Sample{event.coarse_window, event.coarse_target, Scale::coarse});
    fine_queues[target_model].push_back(
        Sample{event.fine_window, model.local_of_fine[event.fine_target],
               Scale::fine});
  }

  const auto run_track = [&cfg, epochs](CnnModel& target, std::span<const Sample> queue,
                                        CurveTrack& track) {
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      for (std::size_t start = 0; start < queue.size(); start += cfg.batch_size) {
        const std::size_t len = std::min(cfg.batch_size, queue.size() - start);
        track.add(train_step(target, queue.subspan(start, len), cfg.learning_rate));
      }
    }
  };

  CurveTrack coarse_track("coarse");
  std::vector<CurveTrack> fine_tracks;
  for (std::size_t i = 0; i < n_fine; ++i) {
    fine_tracks.emplace_back("fine_" + std::to_string(i));
  }

  {
    std::vector<std::jthread> workers;
    workers.emplace_back([&] { run_track(model.coarse, coarse_queue, coarse_track); });
    for (std::size_t i = 0; i < n_fine; ++i) {
      workers.emplace_back(
          [&, i] { run_track(model.fines[i], fine_queues[i], fine_tracks[i]); });
    }
  }

  if (curves != nullptr) {
    curves->rows.clear();
    for (const auto& point : coarse_track.points()) curves->rows.push_back(point);
    for (const auto& track : fine_tracks) {
      for (const auto& point : track.points()) curves->rows.push_back(point);
    }
  }
}

void train_flat_online(std::span<const StreamEvent> events, CnnModel& model,
                       const TrainConfig& cfg, CurveData* curves) {
  CurveTrack track("flat");
  std::vector<Sample> buffer;
  const std::size_t epochs = std::max<std::size_t>(1, cfg.epochs);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& event : events) {
      buffer.push_back(Sample{event.fine_window, event.fine_target, Scale::fine});
      if (buffer.size() >= cfg.batch_size) {
        track.add(train_step(model, buffer, cfg.learning_rate));
        buffer.clear();
      }
    }
    if (!buffer.empty()) {
      track.add(train_step(model, buffer, cfg.learning_rate));
      buffer.clear();
    }
  }
  if (curves != nullptr) {
    curves->rows.assign(track.points().begin(), track.points().end());
  }
}

// ---------------------------------------------------------------------------
// Model files.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'S', 'P', 'A', 'C', 'E', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { write_le(v); }
  void u64(std::uint64_t v) { write_le(v); }
  void i64(std::int64_t v) { write_le(static_cast<std::uint64_t>(v)); }
  void f64(double v) { write_le(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

 private:
  template <typename T>
  void write_le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    bytes(buf, sizeof(T));
  }

  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CorruptFile("model file: unexpected end of data");
    }
  }
  std::uint8_t u8() {
    std::uint8_t v = 0;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() { return read_le<std::uint32_t>(); }
  std::uint64_t u64() { return read_le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(read_le<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(read_le<std::uint64_t>()); }
  std::string str() {
    const std::uint64_t len = u64();
    if (len > (1ull << 32)) throw CorruptFile("model file: absurd string length");
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }
  bool at_end() { return in_.peek() == std::istream::traits_type::eof(); }

 private:
  template <typename T>
  T read_le() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(buf[i]) << (8 * i);
    }
    return v;
  }

  std::istream& in_;
};

void write_tensor(BinaryWriter& w, const Tensor& t) {
  w.u64(t.shape.size());
  for (std::size_t d : t.shape) w.u64(d);
  for (double v : t.data) w.f64(v);
}

Tensor read_tensor(BinaryReader& r) {
  const std::uint64_t rank = r.u64();
  if (rank > 8) throw CorruptFile("model file: absurd tensor rank");
  std::vector<std::size_t> shape(rank);
  std::size_t total = 1;
  for (auto& d : shape) {
    d = r.u64();
    if (d == 0 || total > (1ull << 28) / std::max<std::size_t>(d, 1)) {
      throw CorruptFile("model file: absurd tensor shape");
    }
    total *= d;
  }
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = r.f64();
  return t;
}

void write_net_config(BinaryWriter& w, const NetConfig& net) {
  w.u64(net.filters);
  w.u64(net.kernel_width);
  w.u64(net.pool_width);
  w.u64(net.pool_stride);
  w.u8(net.lrn_enabled ? 1 : 0);
  w.f64(net.lrn.k);
  w.u64(net.lrn.n_neighbors);
  w.f64(net.lrn.alpha);
  w.f64(net.lrn.beta);
  w.f64(net.conv_bias_init);
  w.f64(net.prelu_init);
}

NetConfig read_net_config(BinaryReader& r) {
  NetConfig net;
  net.filters = r.u64();
  net.kernel_width = r.u64();
  net.pool_width = r.u64();
  net.pool_stride = r.u64();
  net.lrn_enabled = r.u8() != 0;
  net.lrn.k = r.f64();
  net.lrn.n_neighbors = r.u64();
  net.lrn.alpha = r.f64();
  net.lrn.beta = r.f64();
  net.conv_bias_init = r.f64();
  net.prelu_init = r.f64();
  return net;
}

void write_cnn(BinaryWriter& w, const CnnModel& m) {
  w.u64(m.in_channels);
  w.u64(m.num_classes);
  w.u64(m.window);
  write_net_config(w, m.net);
  write_tensor(w, m.conv_kernels);
  write_tensor(w, m.conv_bias);
  write_tensor(w, m.prelu_slopes);
  write_tensor(w, m.softmax_w);
}

CnnModel read_cnn(BinaryReader& r) {
  CnnModel m;
  m.in_channels = r.u64();
  m.num_classes = r.u64();
  m.window = r.u64();
  m.net = read_net_config(r);
  m.conv_kernels = read_tensor(r);
  m.conv_bias = read_tensor(r);
  m.prelu_slopes = read_tensor(r);
  m.softmax_w = read_tensor(r);
  return m;
}

void write_index(BinaryWriter& w, const StationIndex& index) {
  const int n = index.num_fine();
  w.u64(static_cast<std::uint64_t>(n));
  for (int fine = 0; fine < n; ++fine) {
    const GeoPoint& p = index.point_of(fine);
    w.f64(p.longitude);
    w.f64(p.latitude);
    w.u64(static_cast<std::uint64_t>(index.coarse_of(fine)));
  }
  const int n_coarse = index.num_coarse();
  w.u64(static_cast<std::uint64_t>(n_coarse));
  for (int coarse = 0; coarse < n_coarse; ++coarse) {
    w.str(index.lacid_of_coarse(coarse));
  }
}

StationIndex read_index(BinaryReader& r) {
  const std::uint64_t n = r.u64();
  if (n > (1ull << 24)) throw CorruptFile("model file: absurd station count");
  std::vector<GeoPoint> points(n);
  std::vector<int> coarse_by_fine(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    points[i].longitude = r.f64();
    points[i].latitude = r.f64();
    coarse_by_fine[i] = static_cast<int>(r.u64());
  }
  const std::uint64_t n_coarse = r.u64();
  if (n_coarse > n) throw CorruptFile("model file: coarse count exceeds fine count");
  std::vector<std::string> lacids(n_coarse);
  for (auto& lacid : lacids) lacid = r.str();
  return StationIndex::from_parts(std::move(points), std::move(coarse_by_fine),
                                  std::move(lacids));
}

void write_train_config(BinaryWriter& w, const TrainConfig& cfg) {
  w.f64(cfg.learning_rate);
  w.u64(cfg.batch_size);
  w.u64(cfg.epochs);
  w.u64(cfg.seed);
  w.u64(cfg.window);
  write_net_config(w, cfg.net);
}

TrainConfig read_train_config(BinaryReader& r) {
  TrainConfig cfg;
  cfg.learning_rate = r.f64();
  cfg.batch_size = r.u64();
  cfg.epochs = r.u64();
  cfg.seed = r.u64();
  cfg.window = r.u64();
  cfg.net = read_net_config(r);
  return cfg;
}

}  // namespace

void save_model(const SavedModel& model, std::ostream& out) {
  BinaryWriter w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(model.kind));
  write_train_config(w, model.cfg);
  write_index(w, model.index);
  if (model.kind == ModelKind::hierarchical) {
    const HierModel& h = model.hier;
    w.u64(h.window);
    w.u64(h.fine_to_coarse.size());
    for (int v : h.fine_to_coarse) w.u64(static_cast<std::uint64_t>(v));
    write_cnn(w, h.coarse);
    w.u64(h.fines.size());
    for (std::size_t i = 0; i < h.fines.size(); ++i) {
      w.u64(h.fine_classes[i].size());
      for (int v : h.fine_classes[i]) w.u64(static_cast<std::uint64_t>(v));
      write_cnn(w, h.fines[i]);
    }
  } else {
    write_cnn(w, model.flat);
  }
}

SavedModel load_model(std::istream& in) {
  BinaryReader r(in);
  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw VersionMismatch("model file: unrecognized magic header");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw VersionMismatch("model file: unsupported version " +
                          std::to_string(version));
  }

  SavedModel model;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw CorruptFile("model file: unknown model kind");
  model.kind = static_cast<ModelKind>(kind);
  model.cfg = read_train_config(r);
  model.index = read_index(r);
  if (model.kind == ModelKind::hierarchical) {
    HierModel& h = model.hier;
    h.window = r.u64();
    const std::uint64_t n = r.u64();
    if (n > (1ull << 24)) throw CorruptFile("model file: absurd label count");
    h.fine_to_coarse.resize(n);
    for (auto& v : h.fine_to_coarse) v = static_cast<int>(r.u64());
    h.coarse = read_cnn(r);
    const std::uint64_t n_fine_models = r.u64();
    if (n_fine_models > n) {
      throw CorruptFile("model file: more fine models than labels");
    }
    h.local_of_fine.assign(n, -1);
    for (std::uint64_t i = 0; i < n_fine_models; ++i) {
      const std::uint64_t classes = r.u64();
      if (classes > n) throw CorruptFile("model file: absurd class count");
      std::vector<int> labels(classes);
      for (auto& v : labels) v = static_cast<int>(r.u64());
      for (std::size_t local = 0; local < labels.size(); ++local) {
        if (labels[local] < 0 || static_cast<std::uint64_t>(labels[local]) >= n) {
          throw CorruptFile("model file: class label out of range");
        }
        h.local_of_fine[labels[local]] = static_cast<int>(local);
      }
      h.fine_classes.push_back(std::move(labels));
      h.fines.push_back(read_cnn(r));
    }
  } else {
    model.flat = read_cnn(r);
  }
  if (!r.at_end()) {
    throw CorruptFile("model file: trailing bytes after model data");
  }
  return model;
}

void save_model(const SavedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_model: cannot open '" + path + "' for writing");
  save_model(model, out);
  out.flush();
  if (!out) throw Error("save_model: write to '" + path + "' failed");
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_model: cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace deepspace
