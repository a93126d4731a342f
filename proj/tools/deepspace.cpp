// deepspace: generate / clean / encode / train / eval / sweep / export-paths /
// gradcheck over UDR-style trajectory CSVs. Diagnostics go to stderr, data to
// the declared output paths. Exit codes: 0 ok, 1 usage error, 2 data error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepspace/eval.hpp"
#include "deepspace/synth.hpp"

namespace ds = deepspace;

namespace {

constexpr std::uint64_t kFlatSeedSalt = 0xF1A7;

std::vector<ds::Trajectory> load_clean(const std::string& path, double v_max) {
  std::ifstream in(path);
  if (!in) throw ds::Error("cannot open input '" + path + "'");
  ds::ParseResult parsed = ds::parse_udr_csv(in);
  if (!parsed.rejected.empty()) {
    std::cerr << "note: rejected " << parsed.rejected.size() << " malformed line(s)\n";
  }
  ds::CleanConfig cfg;
  cfg.v_max_kmh = v_max;
  return ds::clean_pipeline(std::move(parsed.records), cfg);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ds::Error("cannot open output '" + path + "'");
  return out;
}

struct GenerateOptions {
  std::size_t lacs = 4;
  std::size_t stations = 10;
  std::size_t days = 23;
  std::size_t records_per_day = 200;
  std::size_t users = 1;
  double regularity = 0.9;
  double scatter_km = 2.0;
  std::vector<double> bbox;  // lon_min lat_min lon_max lat_max
  double anomaly_rate = 0.0;
  std::uint64_t seed = 0;
  std::string output;
  std::string truth_path;
};

int cmd_generate(const GenerateOptions& opt) {
  ds::WorldConfig world_cfg;
  if (!opt.bbox.empty()) {
    world_cfg.lon_min = opt.bbox[0];
    world_cfg.lat_min = opt.bbox[1];
    world_cfg.lon_max = opt.bbox[2];
    world_cfg.lat_max = opt.bbox[3];
  }
  world_cfg.scatter_radius_km = opt.scatter_km;
  const ds::SynthWorld world =
      ds::generate_world(opt.lacs, opt.stations, world_cfg, opt.seed);

  std::vector<ds::UdrRecord> all_records;
  std::vector<ds::InjectionTruth> all_truth;
  for (std::size_t u = 0; u < opt.users; ++u) {
    char phone[16];
    std::snprintf(phone, sizeof phone, "739%08zu", u + 1);
    const ds::Persona persona =
        ds::make_persona(world, opt.regularity, ds::mix_seed(opt.seed ^ (0xBEEF + u)));
    auto records = ds::generate_trajectory(world, persona, phone, opt.days,
                                           opt.records_per_day,
                                           ds::mix_seed(opt.seed ^ (0xFACE + u)));
    if (opt.anomaly_rate > 0.0) {
      auto injected = ds::inject_anomalies(std::move(records), opt.anomaly_rate,
                                           ds::mix_seed(opt.seed ^ (0xAAAA + u)));
      for (auto truth : injected.truth) {
        truth.record_index += all_records.size();
        all_truth.push_back(std::move(truth));
      }
      records = std::move(injected.records);
    }
    all_records.insert(all_records.end(), records.begin(), records.end());
  }

  auto out = open_output(opt.output);
  ds::write_udr_csv(out, all_records);
  std::cerr << "generated " << all_records.size() << " records, "
            << world.num_stations() << " stations, " << world.num_lacs()
            << " LACs\n";

  if (!opt.truth_path.empty()) {
    auto truth_out = open_output(opt.truth_path);
    truth_out << "record_index,original_lon,original_lat,original_lacid\n";
    for (const auto& t : all_truth) {
      truth_out << t.record_index << ','
                << ds::format_coordinate(t.original_location.longitude) << ','
                << ds::format_coordinate(t.original_location.latitude) << ','
                << t.original_lacid << '\n';
    }
    std::cerr << "injected " << all_truth.size() << " anomalies\n";
  }
  return 0;
}

int cmd_clean(const std::string& input, const std::string& output, double v_max) {
  const auto trajectories = load_clean(input, v_max);
  std::size_t points = 0;
  for (const auto& t : trajectories) points += t.points.size();
  auto out = open_output(output);
  ds::write_udr_csv(out, trajectories);
  std::cerr << "cleaned " << points << " records across " << trajectories.size()
            << " user(s)\n";
  return 0;
}

int cmd_encode(const std::string& input, const std::string& output,
               std::size_t window, const std::string& scale_name, double v_max) {
  const auto trajectories = load_clean(input, v_max);
  const auto index = ds::StationIndex::build(trajectories);
  const ds::Scale scale =
      scale_name == "coarse" ? ds::Scale::coarse : ds::Scale::fine;

  std::vector<ds::Sample> samples;
  for (const auto& traj : trajectories) {
    const auto labels = ds::encode_trajectory(traj, index, scale);
    auto windows = ds::make_windows(labels, window, scale);
    samples.insert(samples.end(), std::make_move_iterator(windows.begin()),
                   std::make_move_iterator(windows.end()));
  }
  auto out = open_output(output);
  ds::write_samples_csv(out, samples);
  std::cerr << "encoded " << samples.size() << " samples at scale " << scale_name
            << " (n=" << index.num_fine() << ", n'=" << index.num_coarse() << ")\n";
  return 0;
}

struct TrainOptions {
  std::string input;
  std::string output;
  std::string curves_path;
  std::string mode = "hierarchical";
  ds::TrainConfig cfg;
  double train_fraction = ds::kDefaultTrainFraction;
  double v_max = 150.0;
  bool parallel = false;
};

int cmd_train(const TrainOptions& opt) {
  const auto trajectories = load_clean(opt.input, opt.v_max);
  ds::Dataset dataset =
      ds::assemble_dataset(trajectories, opt.cfg.window, opt.train_fraction);
  if (dataset.train.empty()) {
    throw ds::SequenceTooShort("train: no training samples at W=" +
                               std::to_string(opt.cfg.window));
  }
  std::cerr << "train events: " << dataset.train.size()
            << ", held-out events: " << dataset.test.size()
            << ", n=" << dataset.index.num_fine()
            << ", n'=" << dataset.index.num_coarse() << '\n';

  ds::SavedModel saved;
  saved.cfg = opt.cfg;
  ds::CurveData curves;
  ds::CurveData* curves_ptr = opt.curves_path.empty() ? nullptr : &curves;

  if (opt.mode == "flat") {
    saved.kind = ds::ModelKind::flat;
    const auto n = static_cast<std::size_t>(dataset.index.num_fine());
    saved.flat = ds::init_model(n, n, opt.cfg, opt.cfg.seed ^ ds::mix_seed(kFlatSeedSalt));
    ds::train_flat_online(dataset.train, saved.flat, opt.cfg, curves_ptr);
  } else {
    saved.kind = ds::ModelKind::hierarchical;
    saved.hier = ds::build_hier_model(dataset.index, opt.cfg);
    if (opt.parallel) {
      ds::train_online_parallel(dataset.train, saved.hier, opt.cfg, curves_ptr);
    } else {
      ds::train_online(dataset.train, saved.hier, opt.cfg, curves_ptr);
    }
  }
  saved.index = std::move(dataset.index);
  ds::save_model(saved, opt.output);
  if (curves_ptr != nullptr) {
    auto out = open_output(opt.curves_path);
    ds::write_curves_csv(out, curves);
  }
  std::cerr << "model written to " << opt.output << '\n';
  return 0;
}

int cmd_eval(const std::string& input, const std::string& model_path,
             const std::string& output, double train_fraction, double v_max) {
  const ds::SavedModel saved = ds::load_model(model_path);
  const auto trajectories = load_clean(input, v_max);
  const ds::Dataset dataset = ds::assemble_with_index(
      trajectories, saved.index, saved.cfg.window, train_fraction);
  if (dataset.test.empty()) {
    throw ds::EmptyTestSet("eval: no test samples at W=" +
                           std::to_string(saved.cfg.window));
  }

  auto out = open_output(output);
  if (saved.kind == ds::ModelKind::hierarchical) {
    ds::SweepRow row;
    row.window = saved.cfg.window;
    row.hier = ds::evaluate(saved.hier, dataset.test);
    ds::write_metrics_csv(out, std::vector<ds::SweepRow>{row});
    std::cerr << "coarse " << row.hier.coarse_acc << ", fine " << row.hier.fine_acc
              << ", whole " << row.hier.whole_acc << " over "
              << dataset.test.size() << " samples\n";
  } else {
    const double acc = ds::evaluate_flat(saved.flat, dataset.test);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", saved.cfg.window, acc);
    out << "time_intervals,flat_acc\n" << buf;
    std::cerr << "flat accuracy " << acc << " over " << dataset.test.size()
              << " samples\n";
  }
  return 0;
}

struct SweepOptions {
  std::string input;
  std::string output;
  std::string curves_path;
  std::vector<std::size_t> windows = {50, 100, 150, 200};
  ds::TrainConfig cfg;
  double train_fraction = ds::kDefaultTrainFraction;
  double v_max = 150.0;
  bool with_flat = false;
};

int cmd_sweep(const SweepOptions& opt) {
  const auto trajectories = load_clean(opt.input, opt.v_max);
  ds::CurveData curves;
  ds::CurveData* curves_ptr = opt.curves_path.empty() ? nullptr : &curves;
  const auto rows = ds::sweep_windows(trajectories, opt.windows, opt.cfg,
                                      opt.with_flat, opt.train_fraction, curves_ptr);
  auto out = open_output(opt.output);
  ds::write_metrics_csv(out, rows);
  if (curves_ptr != nullptr) {
    auto curves_out = open_output(opt.curves_path);
    ds::write_curves_csv(curves_out, curves);
  }
  std::cerr << "swept " << rows.size() << " window length(s)\n";
  return 0;
}

int cmd_export_paths(const std::string& input, const std::string& model_path,
                     const std::string& output, const std::string& user,
                     double v_max) {
  const ds::SavedModel saved = ds::load_model(model_path);
  const auto trajectories = load_clean(input, v_max);
  const ds::Trajectory* traj = nullptr;
  if (user.empty()) {
    if (!trajectories.empty()) traj = &trajectories.front();
  } else {
    for (const auto& t : trajectories) {
      if (t.user == user) {
        traj = &t;
        break;
      }
    }
  }
  if (traj == nullptr) {
    throw ds::Error("export-paths: no trajectory for user '" + user + "'");
  }

  const auto rows = saved.kind == ds::ModelKind::hierarchical
                        ? ds::export_paths(saved.hier, *traj, saved.index)
                        : ds::export_paths(saved.flat, *traj, saved.index);
  auto out = open_output(output);
  ds::write_paths_csv(out, rows);
  std::cerr << "exported " << rows.size() << " path rows for user " << traj->user
            << '\n';
  return 0;
}

int cmd_gradcheck(std::size_t seeds, double epsilon, double tolerance,
                  std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  ds::GradCheckResult worst;
  for (std::size_t i = 0; i < seeds; ++i) {
    ds::Rng rng(ds::mix_seed(seed ^ (0x6AD0 + i)));
    const std::size_t channels = 3 + rng.uniform_int(6);
    const std::size_t classes = 2 + rng.uniform_int(5);
    ds::TrainConfig cfg;
    cfg.window = 8 + rng.uniform_int(9);
    cfg.seed = rng.next_u64();
    // Alternate bias inits so both PReLU branches carry gradient.
    cfg.net.conv_bias_init = (i % 2 == 0) ? 0.9 : -0.1;
    const ds::CnnModel model =
        ds::init_model(channels, classes, cfg, rng.next_u64());

    ds::Sample sample;
    sample.window.resize(cfg.window);
    for (int& label : sample.window) {
      label = static_cast<int>(rng.uniform_int(channels));
    }
    sample.target = static_cast<int>(rng.uniform_int(classes));

    const auto result = ds::grad_check_detail(model, sample, epsilon);
    worst.conv_kernels = std::max(worst.conv_kernels, result.conv_kernels);
    worst.conv_bias = std::max(worst.conv_bias, result.conv_bias);
    worst.prelu_slopes = std::max(worst.prelu_slopes, result.prelu_slopes);
    worst.softmax_w = std::max(worst.softmax_w, result.softmax_w);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "conv_kernels  %.3e\nconv_bias     %.3e\nprelu_slopes  %.3e\n"
                "softmax_w     %.3e\n",
                worst.conv_kernels, worst.conv_bias, worst.prelu_slopes,
                worst.softmax_w);
  std::cout << buf;
  const bool ok = worst.max_error() < tolerance;
  std::snprintf(buf, sizeof buf, "max %.3e %s tolerance %.1e over %zu seeds: %s\n",
                worst.max_error(), ok ? "<" : ">=", tolerance, seeds,
                ok ? "PASS" : "FAIL");
  std::cout << buf;
  std::cerr << "gradcheck ran in " << elapsed << " s\n";
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepSpace: hierarchical online next-position prediction over "
               "UDR trajectory streams"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command flags override");

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic UDR CSV");
  generate->add_option("--lacs", gen.lacs, "Number of LAC areas")->capture_default_str();
  generate->add_option("--stations", gen.stations, "Stations per LAC")->capture_default_str();
  generate->add_option("--days", gen.days, "Simulated days")->capture_default_str();
  generate->add_option("--records-per-day", gen.records_per_day, "Records per day per user")
      ->capture_default_str();
  generate->add_option("--users", gen.users, "Number of users")->capture_default_str();
  generate->add_option("--regularity", gen.regularity, "Routine regularity in [0,1]")
      ->capture_default_str();
  generate->add_option("--scatter-km", gen.scatter_km, "Station scatter radius (km)")
      ->capture_default_str();
  generate->add_option("--bbox", gen.bbox,
                       "lon_min lat_min lon_max lat_max (default 119 28 121 30)")
      ->expected(4);
  generate->add_option("--anomaly-rate", gen.anomaly_rate,
                       "Switching-anomaly rate over stationary pairs")
      ->capture_default_str();
  generate->add_option("--truth", gen.truth_path, "Anomaly ground-truth sidecar CSV");
  generate->add_option("--seed", gen.seed, "Random seed")->envname("DEEPSPACE_SEED");
  generate->add_option("-o,--output", gen.output, "Output CSV")->required();

  std::string in_path, out_path, model_path, curves_path, user, scale = "fine";
  std::string mode = "hierarchical";
  double v_max = 150.0;
  double train_fraction = ds::kDefaultTrainFraction;
  std::size_t window = 50;
  bool parallel = false;
  bool with_flat = false;
  std::vector<std::size_t> sweep_ws = {50, 100, 150, 200};
  ds::TrainConfig train_cfg;

  auto* clean = app.add_subcommand("clean", "Run the cleaning pipeline over a UDR CSV");
  clean->add_option("-i,--input", in_path, "Input CSV")->required();
  clean->add_option("-o,--output", out_path, "Output CSV")->required();
  clean->add_option("--vmax", v_max, "Speed ceiling km/h")->capture_default_str();

  auto* encode = app.add_subcommand("encode", "Persist encoded windows as CSV");
  encode->add_option("-i,--input", in_path, "Input CSV")->required();
  encode->add_option("-o,--output", out_path, "Output CSV")->required();
  encode->add_option("-W,--window", window, "Window length")->capture_default_str();
  encode->add_option("--scale", scale, "fine | coarse")
      ->check(CLI::IsMember({"fine", "coarse"}))
      ->capture_default_str();
  encode->add_option("--vmax", v_max, "Speed ceiling km/h")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a model online over the stream");
  train->add_option("-i,--input", in_path, "Input CSV")->required();
  train->add_option("-o,--output", model_path, "Output model file")->required();
  train->add_option("-W,--window", train_cfg.window, "Window length")->capture_default_str();
  train->add_option("--mode", mode, "hierarchical | flat")
      ->check(CLI::IsMember({"hierarchical", "flat"}))
      ->capture_default_str();
  train->add_option("--curves", curves_path, "Training-curve CSV");
  train->add_option("--epochs", train_cfg.epochs, "Passes over the stream")
      ->capture_default_str();
  train->add_option("--batch", train_cfg.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--seed", train_cfg.seed, "Random seed")->envname("DEEPSPACE_SEED");
  train->add_option("--train-fraction", train_fraction, "Chronological train fraction")
      ->capture_default_str();
  train->add_option("--vmax", v_max, "Speed ceiling km/h")->capture_default_str();
  train->add_flag("--parallel", parallel, "Update fine models concurrently");

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the held-out tail");
  eval->add_option("-i,--input", in_path, "Input CSV")->required();
  eval->add_option("-m,--model", model_path, "Model file")->required();
  eval->add_option("-o,--output", out_path, "Metrics CSV")->required();
  eval->add_option("--train-fraction", train_fraction, "Chronological train fraction")
      ->capture_default_str();
  eval->add_option("--vmax", v_max, "Speed ceiling km/h")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Train/evaluate across window lengths");
  sweep->add_option("-i,--input", in_path, "Input CSV")->required();
  sweep->add_option("-o,--output", out_path, "Metrics CSV")->required();
  sweep->add_option("--windows", sweep_ws, "Window lengths")->capture_default_str();
  sweep->add_option("--curves", curves_path, "Training-curve CSV");
  sweep->add_flag("--with-flat", with_flat, "Also train the flat baseline");
  sweep->add_option("--epochs", train_cfg.epochs, "Passes over the stream")
      ->capture_default_str();
  sweep->add_option("--batch", train_cfg.batch_size, "Mini-batch size")->capture_default_str();
  sweep->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
  sweep->add_option("--seed", train_cfg.seed, "Random seed")->envname("DEEPSPACE_SEED");
  sweep->add_option("--train-fraction", train_fraction, "Chronological train fraction")
      ->capture_default_str();
  sweep->add_option("--vmax", v_max, "Speed ceiling km/h")->capture_default_str();

  auto* paths = app.add_subcommand("export-paths", "Write true vs predicted coordinates");
  paths->add_option("-i,--input", in_path, "Input CSV")->required();
  paths->add_option("-m,--model", model_path, "Model file")->required();
  paths->add_option("-o,--output", out_path, "Path CSV")->required();
  paths->add_option("--user", user, "phonenum to export (default: first)");
  paths->add_option("--vmax", v_max, "Speed ceiling km/h")->capture_default_str();

  std::size_t gc_seeds = 20;
  double gc_epsilon = 1e-5, gc_tolerance = 1e-4;
  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Verify analytic gradients");
  gradcheck->add_option("--seeds", gc_seeds, "Number of random configurations")
      ->capture_default_str();
  gradcheck->add_option("--epsilon", gc_epsilon, "Finite-difference step")
      ->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tolerance, "Max relative error allowed")
      ->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "Random seed")->envname("DEEPSPACE_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen);
    if (clean->parsed()) return cmd_clean(in_path, out_path, v_max);
    if (encode->parsed()) return cmd_encode(in_path, out_path, window, scale, v_max);
    if (train->parsed()) {
      TrainOptions opt;
      opt.input = in_path;
      opt.output = model_path;
      opt.curves_path = curves_path;
      opt.mode = mode;
      opt.cfg = train_cfg;
      opt.train_fraction = train_fraction;
      opt.v_max = v_max;
      opt.parallel = parallel;
      return cmd_train(opt);
    }
    if (eval->parsed()) {
      return cmd_eval(in_path, model_path, out_path, train_fraction, v_max);
    }
    if (sweep->parsed()) {
      SweepOptions opt;
      opt.input = in_path;
      opt.output = out_path;
      opt.curves_path = curves_path;
      opt.windows = sweep_ws;
      opt.cfg = train_cfg;
      opt.train_fraction = train_fraction;
      opt.v_max = v_max;
      opt.with_flat = with_flat;
      return cmd_sweep(opt);
    }
    if (paths->parsed()) {
      return cmd_export_paths(in_path, model_path, out_path, user, v_max);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gc_seeds, gc_epsilon, gc_tolerance, gc_seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
