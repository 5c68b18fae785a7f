#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nilm/data.hpp"
#include "nilm/evaluation.hpp"
#include "nilm/model.hpp"
#include "nilm/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitDivergence = 3;

struct RunConfig {
  std::string out_dir = "run";
  nilm::ModelConfig model;
  nilm::TrainConfig train;
  double threshold_watts = 10.0;

  // data section
  std::string csv_path;
  int appliance_column = 1;
  std::string appliance_name = "appliance";
  double train_fraction = 0.7;
  int stride_train = 1;
  int stride_eval = 0;  // 0 means non-overlapping (stride == window)
  Eigen::Index region_start = 0;
  Eigen::Index region_len = 0;  // 0 means the whole file

  nilm::SyntheticConfig synth;
};

nilm::ApplianceSpec::Kind kind_from_string(const std::string& s) {
  if (s == "cyclic") return nilm::ApplianceSpec::Kind::Cyclic;
  if (s == "spike") return nilm::ApplianceSpec::Kind::Spike;
  if (s == "program") return nilm::ApplianceSpec::Kind::Program;
  throw std::runtime_error("unknown appliance kind: " + s);
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j = json::parse(in);

  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threshold_watts = j.value("threshold_watts", cfg.threshold_watts);
  if (j.contains("model"))
    cfg.model = nilm::config_from_json(j["model"].dump());
  if (j.contains("train")) {
    const json& t = j["train"];
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.adam_beta1 = t.value("adam_beta1", cfg.train.adam_beta1);
    cfg.train.adam_beta2 = t.value("adam_beta2", cfg.train.adam_beta2);
    cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
    cfg.train.seed = t.value("seed", cfg.train.seed);
    cfg.train.shuffle_each_epoch =
        t.value("shuffle_each_epoch", cfg.train.shuffle_each_epoch);
    cfg.train.clip_norm = t.value("clip_norm", cfg.train.clip_norm);
    cfg.train.checkpoint_every =
        t.value("checkpoint_every", cfg.train.checkpoint_every);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    cfg.csv_path = d.value("csv_path", cfg.csv_path);
    cfg.appliance_column = d.value("appliance_column", cfg.appliance_column);
    cfg.appliance_name = d.value("appliance_name", cfg.appliance_name);
    cfg.train_fraction = d.value("train_fraction", cfg.train_fraction);
    cfg.stride_train = d.value("stride_train", cfg.stride_train);
    cfg.stride_eval = d.value("stride_eval", cfg.stride_eval);
    cfg.region_start = d.value("region_start", cfg.region_start);
    cfg.region_len = d.value("region_len", cfg.region_len);
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    cfg.synth.duration_samples =
        s.value("duration_samples", cfg.synth.duration_samples);
    cfg.synth.noise_std = s.value("noise_std", cfg.synth.noise_std);
    cfg.synth.seed = s.value("seed", cfg.synth.seed);
    cfg.synth.start_unix = s.value("start_unix", cfg.synth.start_unix);
    for (const json& a : s.value("appliances", json::array())) {
      nilm::ApplianceSpec spec;
      spec.name = a.value("name", std::string("appliance"));
      spec.kind = kind_from_string(a.value("kind", std::string("cyclic")));
      spec.power = a.value("power", spec.power);
      spec.on_min = a.value("on_min", spec.on_min);
      spec.on_max = a.value("on_max", spec.on_max);
      spec.off_min = a.value("off_min", spec.off_min);
      spec.off_max = a.value("off_max", spec.off_max);
      cfg.synth.appliances.push_back(spec);
    }
  }
  return cfg;
}

nilm::TimeSeries clip_region(const nilm::TimeSeries& s, Eigen::Index start,
                             Eigen::Index len) {
  if (len <= 0) return s;
  if (start < 0 || start + len > s.size())
    throw std::runtime_error("region [" + std::to_string(start) + ", +" +
                             std::to_string(len) + ") outside series of " +
                             std::to_string(s.size()));
  nilm::TimeSeries out;
  out.label = s.label;
  out.values = s.values.segment(start, len);
  out.timestamps.assign(s.timestamps.begin() + start,
                        s.timestamps.begin() + start + len);
  nilm::flag_gaps(out);
  return out;
}

int cmd_synth(const RunConfig& cfg) {
  if (cfg.synth.duration_samples < 1)
    throw std::runtime_error("synth: duration_samples must be >= 1");
  fs::create_directories(cfg.out_dir);
  const nilm::SyntheticHousehold h = nilm::generate_synthetic(cfg.synth);
  nilm::write_refit_csv(cfg.out_dir + "/synthetic.csv", h);
  for (const auto& a : h.appliances)
    nilm::write_series_csv(cfg.out_dir + "/truth_" + a.label + ".csv", a);
  std::cout << "synth: wrote " << h.aggregate.size() << " samples to "
            << cfg.out_dir << "/synthetic.csv\n";
  return 0;
}

int cmd_prepare(const RunConfig& cfg) {
  if (cfg.csv_path.empty())
    throw std::runtime_error("prepare: data.csv_path is required");
  const nilm::RefitLoad load =
      nilm::load_refit_csv(cfg.csv_path, cfg.appliance_column);
  const nilm::TimeSeries mains =
      clip_region(load.aggregate, cfg.region_start, cfg.region_len);
  const nilm::TimeSeries appliance =
      clip_region(load.appliance, cfg.region_start, cfg.region_len);

  const auto [mains_train, mains_test] =
      nilm::split_train_test(mains, cfg.train_fraction);
  const auto [app_train, app_test] =
      nilm::split_train_test(appliance, cfg.train_fraction);
  // stats come from the training prefix only
  const nilm::NormStats input_stats =
      nilm::compute_norm_stats(mains_train.values);
  const nilm::NormStats target_stats =
      nilm::compute_norm_stats(app_train.values);

  const int w = cfg.model.window_len;
  const int eval_stride = cfg.stride_eval > 0 ? cfg.stride_eval : w;
  const nilm::WindowedDataset train_set =
      nilm::make_windows(mains_train, app_train, w, cfg.stride_train,
                         input_stats, target_stats);
  const nilm::WindowedDataset test_set = nilm::make_windows(
      mains_test, app_test, w, eval_stride, input_stats, target_stats);

  fs::create_directories(cfg.out_dir);
  nilm::write_series_csv(cfg.out_dir + "/train_mains.csv", mains_train);
  nilm::write_series_csv(cfg.out_dir + "/train_appliance.csv", app_train);
  nilm::write_series_csv(cfg.out_dir + "/test_mains.csv", mains_test);
  nilm::write_series_csv(cfg.out_dir + "/test_appliance.csv", app_test);

  json manifest{
      {"source", cfg.csv_path},
      {"appliance_column", cfg.appliance_column},
      {"appliance_name", cfg.appliance_name},
      {"rows_used", mains.size()},
      {"dropped_rows", load.dropped_rows},
      {"split_index", mains_train.size()},
      {"train_rows", mains_train.size()},
      {"test_rows", mains_test.size()},
      {"window_len", w},
      {"stride_train", cfg.stride_train},
      {"stride_eval", eval_stride},
      {"train_windows", train_set.inputs.rows()},
      {"test_windows", test_set.inputs.rows()},
      {"input_stats", {{"mean", input_stats.mean}, {"std", input_stats.std}}},
      {"target_stats", {{"mean", target_stats.mean}, {"std", target_stats.std}}},
  };
  std::ofstream out(cfg.out_dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
  std::cout << "prepare: " << mains_train.size() << "/" << mains_test.size()
            << " split, " << train_set.inputs.rows() << " train windows, "
            << test_set.inputs.rows() << " test windows\n";
  return 0;
}

struct Prepared {
  nilm::TimeSeries mains_train, app_train, mains_test, app_test;
  nilm::NormStats input_stats, target_stats;
  int window_len = 0;
  int stride_train = 1;
  int stride_eval = 1;
};

Prepared load_prepared(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in)
    throw std::runtime_error("no manifest at " + dir +
                             "/manifest.json (run prepare first)");
  const json m = json::parse(in);
  Prepared p;
  p.mains_train = nilm::read_series_csv(dir + "/train_mains.csv");
  p.app_train = nilm::read_series_csv(dir + "/train_appliance.csv");
  p.mains_test = nilm::read_series_csv(dir + "/test_mains.csv");
  p.app_test = nilm::read_series_csv(dir + "/test_appliance.csv");
  p.input_stats = {m["input_stats"]["mean"], m["input_stats"]["std"]};
  p.target_stats = {m["target_stats"]["mean"], m["target_stats"]["std"]};
  p.window_len = m["window_len"];
  p.stride_train = m["stride_train"];
  p.stride_eval = m["stride_eval"];
  return p;
}

int cmd_train(const RunConfig& cfg) {
  const Prepared p = load_prepared(cfg.out_dir);
  if (p.window_len != cfg.model.window_len)
    throw std::runtime_error(
        "train: prepared window " + std::to_string(p.window_len) +
        " does not match model window " + std::to_string(cfg.model.window_len));
  const nilm::WindowedDataset train_set =
      nilm::make_windows(p.mains_train, p.app_train, p.window_len,
                         p.stride_train, p.input_stats, p.target_stats);
  const nilm::WindowedDataset test_set =
      nilm::make_windows(p.mains_test, p.app_test, p.window_len, p.stride_eval,
                         p.input_stats, p.target_stats);

  nilm::Model model = nilm::build_model(cfg.model);
  nilm::TrainConfig tc = cfg.train;
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = cfg.out_dir;
  const nilm::TrainResult result = nilm::train(model, train_set, test_set, tc);

  model.set_params(result.best_params);
  nilm::save_model(model, cfg.out_dir + "/model.nilm");
  nilm::write_history_csv(cfg.out_dir + "/history.csv", result.history);
  std::cout << "train: " << result.history.size() << " epochs, best valid loss "
            << result.best_valid_loss << " at epoch " << result.best_epoch
            << "\n";
  return 0;
}

int cmd_disaggregate(const RunConfig& cfg, const std::string& checkpoint,
                     const std::string& mains_csv) {
  const nilm::Model model = nilm::load_model(checkpoint);
  const nilm::TimeSeries mains = nilm::read_series_csv(mains_csv);
  const Prepared p = load_prepared(cfg.out_dir);
  const int w = model.config.window_len;
  if (mains.size() < w)
    throw std::runtime_error("disaggregate: mains has " +
                             std::to_string(mains.size()) +
                             " samples, window needs " + std::to_string(w));
  const int stride = cfg.stride_eval > 0 ? cfg.stride_eval : w;

  const Eigen::Index n = (mains.size() - w) / stride + 1;
  nilm::Matrix preds(n, w);
  for (Eigen::Index i = 0; i < n; ++i) {
    const nilm::Vector window = nilm::normalize(
        mains.values.segment(i * stride, w).eval(), p.input_stats);
    preds.row(i) = model.forward(window).transpose();
  }
  const Eigen::Index covered = (n - 1) * stride + w;
  const nilm::Vector watts =
      nilm::stitch_predictions(preds, stride, covered, p.target_stats);

  nilm::TimeSeries out;
  out.label = cfg.appliance_name;
  out.values = watts;
  out.timestamps.assign(mains.timestamps.begin(),
                        mains.timestamps.begin() + covered);
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/prediction.csv";
  nilm::write_series_csv(path, out);
  std::cout << "disaggregate: wrote " << covered << " samples to " << path
            << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& truth_csv,
                 const std::string& pred_csv) {
  const nilm::TimeSeries truth = nilm::read_series_csv(truth_csv);
  const nilm::TimeSeries pred = nilm::read_series_csv(pred_csv);
  if (truth.size() != pred.size())
    throw std::runtime_error("evaluate: length mismatch, truth has " +
                             std::to_string(truth.size()) + " rows, pred has " +
                             std::to_string(pred.size()));
  const nilm::ApplianceMetrics m = nilm::evaluate_appliance(
      truth.values, pred.values, cfg.threshold_watts, cfg.appliance_name);
  const nilm::MetricsReport report = nilm::make_report({m});

  fs::create_directories(cfg.out_dir);
  std::ofstream js(cfg.out_dir + "/metrics.json");
  js << nilm::report_to_json(report) << '\n';
  std::ofstream cs(cfg.out_dir + "/metrics.csv");
  cs << nilm::report_to_csv(report);
  std::cout << nilm::report_to_csv(report);
  return 0;
}

int cmd_report(const RunConfig& cfg, const std::string& run_dir,
               const std::string& truth_csv) {
  const nilm::TimeSeries pred =
      nilm::read_series_csv(run_dir + "/prediction.csv");
  std::ifstream truth_in(truth_csv);
  if (!truth_in) throw std::runtime_error("cannot open " + truth_csv);
  // truth column passes through byte-for-byte
  std::vector<std::string> truth_rows;
  std::string line;
  std::getline(truth_in, line);  // header
  while (std::getline(truth_in, line))
    if (!line.empty()) truth_rows.push_back(line);
  if (static_cast<Eigen::Index>(truth_rows.size()) < pred.size())
    throw std::runtime_error("report: truth has " +
                             std::to_string(truth_rows.size()) +
                             " rows, prediction has " +
                             std::to_string(pred.size()));

  fs::create_directories(cfg.out_dir);
  const std::string path =
      cfg.out_dir + "/report_" + cfg.appliance_name + ".csv";
  std::ofstream out(path);
  out << "unix_seconds,truth_watts,predicted_watts\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const std::string& row = truth_rows[i];
    out << row << ',' << pred.values[i] << '\n';
  }
  std::cout << "report: wrote " << pred.size() << " rows to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NILM toolkit: CNN-LSTM energy disaggregation"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::int64_t seed_override = -1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_override, "output directory override");
  app.add_option("--seed", seed_override, "seed override");

  auto* synth = app.add_subcommand("synth", "generate a synthetic household");
  auto* prepare = app.add_subcommand("prepare", "window and normalize a dataset");
  auto* train = app.add_subcommand("train", "train a model on prepared data");
  auto* disaggregate =
      app.add_subcommand("disaggregate", "predict appliance load from mains");
  auto* evaluate = app.add_subcommand("evaluate", "score predictions");
  auto* report = app.add_subcommand("report", "export truth/prediction bundles");

  std::string checkpoint, mains_csv, truth_csv, pred_csv, run_dir;
  disaggregate->add_option("checkpoint", checkpoint)->required();
  disaggregate->add_option("mains", mains_csv)->required();
  evaluate->add_option("truth", truth_csv)->required();
  evaluate->add_option("pred", pred_csv)->required();
  report->add_option("run_dir", run_dir)->required();
  report->add_option("truth", truth_csv)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_override >= 0) {
      cfg.model.seed = static_cast<std::uint64_t>(seed_override);
      cfg.train.seed = static_cast<std::uint64_t>(seed_override);
      cfg.synth.seed = static_cast<std::uint64_t>(seed_override);
    }
    if (synth->parsed()) return cmd_synth(cfg);
    if (prepare->parsed()) return cmd_prepare(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (disaggregate->parsed())
      return cmd_disaggregate(cfg, checkpoint, mains_csv);
    if (evaluate->parsed()) return cmd_evaluate(cfg, truth_csv, pred_csv);
    if (report->parsed()) return cmd_report(cfg, run_dir, truth_csv);
  } catch (const nilm::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
