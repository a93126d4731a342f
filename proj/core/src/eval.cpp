#include "deepspace/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "deepspace/rng.hpp"

namespace deepspace {

Metrics evaluate(const HierModel& model, std::span<const StreamEvent> test) {
  if (test.empty()) throw EmptyTestSet("evaluate: no test samples");

  Metrics metrics;
  metrics.num_samples = test.size();
  metrics.per_fine.resize(model.fines.size());
  std::size_t coarse_ok = 0, fine_ok = 0, whole_ok = 0;

  for (const auto& event : test) {
    const ForwardCache coarse_fwd =
        forward_window(model.coarse, event.coarse_window);
    const int coarse_pred = argmax_label(coarse_fwd.probs);
    const bool coarse_correct = coarse_pred == event.coarse_target;
    if (coarse_correct) ++coarse_ok;

    // Experts in isolation: the fine model of the TRUE coarse label.
    const std::size_t true_model = route(model, event.coarse_target);
    const ForwardCache true_fwd =
        forward_window(model.fines[true_model], event.fine_window);
    const int fine_pred =
        model.fine_classes[true_model][argmax_label(true_fwd.probs)];
    const bool fine_correct = fine_pred == event.fine_target;
    auto& counter = metrics.per_fine[true_model];
    ++counter.samples;
    if (fine_correct) {
      ++counter.correct;
      ++fine_ok;
    }

    // End to end: route by the predicted coarse label. When routing was
    // correct this is the forward pass we already ran.
    int whole_pred;
    if (coarse_correct) {
      whole_pred = fine_pred;
    } else {
      const std::size_t routed = route(model, coarse_pred);
      const ForwardCache routed_fwd =
          forward_window(model.fines[routed], event.fine_window);
      whole_pred = model.fine_classes[routed][argmax_label(routed_fwd.probs)];
    }
    if (whole_pred == event.fine_target) ++whole_ok;
  }

  const double n = static_cast<double>(test.size());
  metrics.coarse_acc = static_cast<double>(coarse_ok) / n;
  metrics.fine_acc = static_cast<double>(fine_ok) / n;
  metrics.whole_acc = static_cast<double>(whole_ok) / n;
  return metrics;
}

double evaluate_flat(const CnnModel& model, std::span<const StreamEvent> test) {
  if (test.empty()) throw EmptyTestSet("evaluate_flat: no test samples");
  std::size_t ok = 0;
  for (const auto& event : test) {
    const ForwardCache fwd = forward_window(model, event.fine_window);
    if (argmax_label(fwd.probs) == event.fine_target) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(test.size());
}

Dataset assemble_dataset(const std::vector<Trajectory>& trajectories,
                         std::size_t window_len, double train_fraction) {
  return assemble_with_index(trajectories, StationIndex::build(trajectories),
                             window_len, train_fraction);
}

Dataset assemble_with_index(const std::vector<Trajectory>& trajectories,
                            StationIndex index, std::size_t window_len,
                            double train_fraction) {
  Dataset dataset{std::move(index), {}, {}};

  for (const auto& traj : trajectories) {
    const auto fine = encode_trajectory(traj, dataset.index, Scale::fine);
    if (fine.size() <= window_len) continue;
    std::vector<int> coarse(fine.size());
    for (std::size_t i = 0; i < fine.size(); ++i) {
      coarse[i] = dataset.index.coarse_of(fine[i]);
    }

    const std::size_t count = fine.size() - window_len;
    const auto cut = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(count)));
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t t = window_len + k;
      StreamEvent event;
      event.user = traj.user;
      event.fine_window.assign(fine.begin() + (t - window_len), fine.begin() + t);
      event.coarse_window.assign(coarse.begin() + (t - window_len),
                                 coarse.begin() + t);
      event.fine_target = fine[t];
      event.coarse_target = coarse[t];
      event.target_time = traj.points[t].stime;
      (k < cut ? dataset.train : dataset.test).push_back(std::move(event));
    }
  }

  const auto by_time = [](const StreamEvent& a, const StreamEvent& b) {
    return a.target_time < b.target_time;
  };
  std::stable_sort(dataset.train.begin(), dataset.train.end(), by_time);
  std::stable_sort(dataset.test.begin(), dataset.test.end(), by_time);
  return dataset;
}

std::vector<SweepRow> sweep_windows(const std::vector<Trajectory>& trajectories,
                                    std::span<const std::size_t> windows,
                                    const TrainConfig& cfg, bool with_flat,
                                    double train_fraction, CurveData* curves) {
  std::vector<SweepRow> rows;
  if (curves != nullptr) curves->rows.clear();

  for (const std::size_t window_len : windows) {
    TrainConfig w_cfg = cfg;
    w_cfg.window = window_len;

    const Dataset dataset =
        assemble_dataset(trajectories, window_len, train_fraction);
    if (dataset.train.empty() || dataset.test.empty()) {
      throw SequenceTooShort("sweep: window " + std::to_string(window_len) +
                             " leaves an empty train or test set");
    }

    HierModel hier = build_hier_model(dataset.index, w_cfg);
    CurveData hier_curves;
    train_online(dataset.train, hier, w_cfg, curves ? &hier_curves : nullptr);

    SweepRow row;
    row.window = window_len;
    row.hier = evaluate(hier, dataset.test);
    if (with_flat) {
      const auto n = static_cast<std::size_t>(dataset.index.num_fine());
      CnnModel flat = init_model(n, n, w_cfg, w_cfg.seed ^ mix_seed(0xF1A7));
      CurveData flat_curves;
      train_flat_online(dataset.train, flat, w_cfg, curves ? &flat_curves : nullptr);
      row.flat_acc = evaluate_flat(flat, dataset.test);
      row.has_flat = true;
      if (curves != nullptr) {
        for (auto& point : flat_curves.rows) hier_curves.rows.push_back(point);
      }
    }
    if (curves != nullptr) {
      for (auto& point : hier_curves.rows) {
        point.model_id = "w" + std::to_string(window_len) + "." + point.model_id;
        curves->rows.push_back(std::move(point));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "# fine_acc conditions on the true coarse label (experts in isolation)\n";
  const bool with_flat =
      !rows.empty() && std::all_of(rows.begin(), rows.end(),
                                   [](const SweepRow& r) { return r.has_flat; });
  out << "time_intervals,coarse_acc,fine_acc,whole_acc";
  if (with_flat) out << ",flat_acc";
  out << '\n';
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f", row.window,
                  row.hier.coarse_acc, row.hier.fine_acc, row.hier.whole_acc);
    out << buf;
    if (with_flat) {
      std::snprintf(buf, sizeof buf, ",%.6f", row.flat_acc);
      out << buf;
    }
    out << '\n';
  }
}

namespace {

template <typename PredictFn>
std::vector<PathRow> export_paths_impl(const Trajectory& traj,
                                       const StationIndex& index,
                                       std::size_t window_len, PredictFn&& predict_at) {
  const auto fine = encode_trajectory(traj, index, Scale::fine);
  if (fine.size() <= window_len) {
    throw SequenceTooShort("export_paths: trajectory shorter than one window");
  }
  std::vector<int> coarse(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) coarse[i] = index.coarse_of(fine[i]);

  std::vector<PathRow> rows;
  rows.reserve(fine.size() - window_len);
  for (std::size_t t = window_len; t < fine.size(); ++t) {
    const std::span<const int> fine_win(fine.data() + (t - window_len), window_len);
    const std::span<const int> coarse_win(coarse.data() + (t - window_len),
                                          window_len);
    PathRow row;
    row.t = t;
    row.truth = traj.points[t].location;
    row.predicted = index.point_of(predict_at(fine_win, coarse_win));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<PathRow> export_paths(const HierModel& model, const Trajectory& traj,
                                  const StationIndex& index) {
  return export_paths_impl(traj, index, model.window,
                           [&](std::span<const int> fine_win,
                               std::span<const int> coarse_win) {
                             return predict(model, fine_win, coarse_win).fine;
                           });
}

std::vector<PathRow> export_paths(const CnnModel& flat_model, const Trajectory& traj,
                                  const StationIndex& index) {
  return export_paths_impl(traj, index, flat_model.window,
                           [&](std::span<const int> fine_win, std::span<const int>) {
                             return argmax_label(
                                 forward_window(flat_model, fine_win).probs);
                           });
}

void write_paths_csv(std::ostream& out, std::span<const PathRow> rows) {
  out << "t,true_lon,true_lat,pred_lon,pred_lat\n";
  for (const auto& row : rows) {
    out << row.t << ',' << format_coordinate(row.truth.longitude) << ','
        << format_coordinate(row.truth.latitude) << ','
        << format_coordinate(row.predicted.longitude) << ','
        << format_coordinate(row.predicted.latitude) << '\n';
  }
}

}  // namespace deepspace
