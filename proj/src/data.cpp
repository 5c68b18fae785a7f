#include "nilm/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace nilm {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  if (begin == end) return false;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

}  // namespace

void flag_gaps(TimeSeries& series, std::int64_t nominal_spacing_s) {
  const auto n = static_cast<std::size_t>(series.size());
  series.gap_after.assign(n > 0 ? n - 1 : 0, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto dt = series.timestamps[i + 1] - series.timestamps[i];
    if (dt > 2 * nominal_spacing_s) series.gap_after[i] = 1;
  }
}

RefitLoad load_refit_csv(const std::string& path, int appliance_column) {
  if (appliance_column < 1 || appliance_column > 9)
    throw std::invalid_argument("appliance column must be in 1..9, got " +
                                std::to_string(appliance_column));
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split_line(line);
  if (header.size() < 12 || header[0] != "Time" || header[1] != "Unix" ||
      header[2] != "Aggregate")
    throw std::runtime_error(path + ": header does not match REFIT layout");

  const std::size_t agg_col = 2;
  const std::size_t app_col = 2 + static_cast<std::size_t>(appliance_column);
  RefitLoad out;
  out.aggregate.label = "aggregate";
  out.appliance.label = header[app_col];
  std::vector<std::int64_t> ts;
  std::vector<double> agg, app;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    double t = 0, a = 0, x = 0;
    if (cells.size() <= app_col || !parse_double(cells[1], t) ||
        !parse_double(cells[agg_col], a) || !parse_double(cells[app_col], x)) {
      ++out.dropped_rows;
      continue;
    }
    ts.push_back(static_cast<std::int64_t>(t));
    agg.push_back(a);
    app.push_back(x);
  }
  if (ts.empty()) throw std::runtime_error(path + ": zero usable rows");
  out.aggregate.timestamps = ts;
  out.appliance.timestamps = std::move(ts);
  out.aggregate.values = Eigen::Map<Vector>(agg.data(), agg.size());
  out.appliance.values = Eigen::Map<Vector>(app.data(), app.size());
  flag_gaps(out.aggregate);
  flag_gaps(out.appliance);
  return out;
}

NormStats compute_norm_stats(const Vector& values, Eigen::Index begin,
                             Eigen::Index end) {
  if (begin < 0 || end > values.size() || begin >= end)
    throw std::invalid_argument("compute_norm_stats: empty or invalid range");
  const auto seg = values.segment(begin, end - begin);
  NormStats s;
  s.mean = seg.mean();
  s.std = std::sqrt((seg.array() - s.mean).square().mean());  // population std
  s.std = std::max(s.std, 1e-8);
  return s;
}

Vector normalize(const Vector& watts, const NormStats& s) {
  return (watts.array() - s.mean) / s.std;
}

Vector denormalize(const Vector& z, const NormStats& s) {
  return z.array() * s.std + s.mean;
}

WindowedDataset make_windows(const TimeSeries& mains,
                             const TimeSeries& appliance, int window_len,
                             int stride, const NormStats& input_stats,
                             const NormStats& target_stats) {
  if (mains.size() != appliance.size())
    throw ShapeError("make_windows: series lengths differ (" +
                     std::to_string(mains.size()) + " vs " +
                     std::to_string(appliance.size()) + ")");
  if (mains.size() < window_len)
    throw ShapeError("make_windows: series length " +
                     std::to_string(mains.size()) + " shorter than window " +
                     std::to_string(window_len));
  if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");

  // prefix sum of flagged gaps so the gap-in-window test is O(1)
  std::vector<Eigen::Index> gaps(1, 0);
  for (std::size_t i = 0; i < mains.gap_after.size(); ++i)
    gaps.push_back(gaps.back() + (mains.gap_after[i] ? 1 : 0));

  std::vector<Eigen::Index> starts;
  const Eigen::Index n_max = (mains.size() - window_len) / stride + 1;
  for (Eigen::Index w = 0; w < n_max; ++w) {
    const Eigen::Index s = w * stride;
    const bool spans_gap =
        !gaps.empty() && gaps[s + window_len - 1] - gaps[s] > 0;
    if (!spans_gap) starts.push_back(s);
  }
  if (starts.empty())
    throw std::runtime_error("make_windows: every window spans a flagged gap");

  WindowedDataset ds;
  ds.window_len = window_len;
  ds.stride = stride;
  ds.input_stats = input_stats;
  ds.target_stats = target_stats;
  ds.inputs.resize(static_cast<Eigen::Index>(starts.size()), window_len);
  ds.targets.resize(static_cast<Eigen::Index>(starts.size()), window_len);
  for (std::size_t r = 0; r < starts.size(); ++r) {
    ds.inputs.row(static_cast<Eigen::Index>(r)) =
        normalize(mains.values.segment(starts[r], window_len), input_stats)
            .transpose();
    ds.targets.row(static_cast<Eigen::Index>(r)) =
        normalize(appliance.values.segment(starts[r], window_len), target_stats)
            .transpose();
  }
  return ds;
}

std::pair<TimeSeries, TimeSeries> split_train_test(const TimeSeries& series,
                                                   double train_fraction) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("train fraction must be in (0,1)");
  const auto cut =
      static_cast<Eigen::Index>(train_fraction * static_cast<double>(series.size()));
  if (cut < 1 || cut >= series.size())
    throw std::runtime_error("split_train_test: a split side would be empty");

  auto slice = [&](Eigen::Index begin, Eigen::Index len) {
    TimeSeries s;
    s.label = series.label;
    s.values = series.values.segment(begin, len);
    s.timestamps.assign(series.timestamps.begin() + begin,
                        series.timestamps.begin() + begin + len);
    if (!series.gap_after.empty() && len > 1)
      s.gap_after.assign(series.gap_after.begin() + begin,
                         series.gap_after.begin() + begin + len - 1);
    return s;
  };
  return {slice(0, cut), slice(cut, series.size() - cut)};
}

Vector stitch_predictions(const Matrix& window_preds, int stride,
                          Eigen::Index total_len,
                          const NormStats& target_stats) {
  const Eigen::Index n = window_preds.rows();
  const Eigen::Index w = window_preds.cols();
  if (n < 1 || stride < 1) throw std::invalid_argument("stitch: empty input");
  const Eigen::Index covered = (n - 1) * stride + w;
  if (covered > total_len)
    throw ShapeError("stitch: " + std::to_string(n) + " windows of " +
                     std::to_string(w) + " at stride " + std::to_string(stride) +
                     " cover " + std::to_string(covered) + " > total " +
                     std::to_string(total_len));
  Vector sum = Vector::Zero(total_len);
  Vector count = Vector::Zero(total_len);
  for (Eigen::Index r = 0; r < n; ++r) {
    sum.segment(r * stride, w) += window_preds.row(r).transpose();
    count.segment(r * stride, w).array() += 1.0;
  }
  Vector out(total_len);
  for (Eigen::Index i = 0; i < total_len; ++i) {
    const double z = count[i] > 0 ? sum[i] / count[i] : 0.0;
    out[i] = std::max(0.0, denormalize(z, target_stats));
  }
  return out;
}

SyntheticHousehold generate_synthetic(const SyntheticConfig& config) {
  std::mt19937_64 rng(config.seed);
  const Eigen::Index n = config.duration_samples;
  SyntheticHousehold h;
  h.aggregate.label = "aggregate";
  h.aggregate.values = Vector::Zero(n);

  for (const auto& spec : config.appliances) {
    TimeSeries s;
    s.label = spec.name;
    s.values = Vector::Zero(n);
    std::uniform_int_distribution<int> on_d(spec.on_min, spec.on_max);
    std::uniform_int_distribution<int> off_d(spec.off_min, spec.off_max);
    Eigen::Index t = 0;
    bool on = spec.kind == ApplianceSpec::Kind::Cyclic;
    while (t < n) {
      if (on) {
        const int dur = on_d(rng);
        if (spec.kind == ApplianceSpec::Kind::Program) {
          // three-stage program: heat, main wash, spin
          const int third = std::max(1, dur / 3);
          for (int k = 0; k < dur && t + k < n; ++k) {
            const double level =
                k < third ? spec.power : (k < 2 * third ? 0.25 * spec.power
                                                        : 0.6 * spec.power);
            s.values[t + k] = level;
          }
        } else {
          for (int k = 0; k < dur && t + k < n; ++k) s.values[t + k] = spec.power;
        }
        t += dur;
      } else {
        t += off_d(rng);
      }
      on = !on;
    }
    h.aggregate.values += s.values;
    h.appliances.push_back(std::move(s));
  }

  if (config.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, config.noise_std);
    for (Eigen::Index i = 0; i < n; ++i) h.aggregate.values[i] += noise(rng);
  }
  h.aggregate.values = h.aggregate.values.cwiseMax(0.0);

  h.aggregate.timestamps.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    h.aggregate.timestamps[i] = config.start_unix + i * config.sample_period_s;
  for (auto& a : h.appliances) a.timestamps = h.aggregate.timestamps;
  flag_gaps(h.aggregate, config.sample_period_s);
  for (auto& a : h.appliances) flag_gaps(a, config.sample_period_s);
  return h;
}

void write_series_csv(const std::string& path, const TimeSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "unix_seconds,watts\n";
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    std::ostringstream row;
    row.precision(17);
    row << series.timestamps[i] << ',' << series.values[i] << '\n';
    out << row.str();
  }
}

TimeSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || split_line(line)[0] != "unix_seconds")
    throw std::runtime_error(path + ": expected unix_seconds,watts header");
  std::vector<std::int64_t> ts;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    double t = 0, v = 0;
    if (cells.size() < 2 || !parse_double(cells[0], t) ||
        !parse_double(cells[1], v))
      throw std::runtime_error(path + ": malformed row: " + line);
    ts.push_back(static_cast<std::int64_t>(t));
    values.push_back(v);
  }
  TimeSeries s;
  s.timestamps = std::move(ts);
  s.values = Eigen::Map<Vector>(values.data(), values.size());
  flag_gaps(s);
  return s;
}

void write_series_json(const std::string& path, const TimeSeries& series) {
  nlohmann::json j;
  j["label"] = series.label;
  j["unix_seconds"] = series.timestamps;
  j["watts"] = std::vector<double>(series.values.data(),
                                   series.values.data() + series.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

void write_refit_csv(const std::string& path, const SyntheticHousehold& h) {
  if (h.appliances.size() > 9)
    throw std::invalid_argument("REFIT layout holds at most 9 appliances");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "Time,Unix,Aggregate";
  for (int i = 1; i <= 9; ++i) out << ",Appliance" << i;
  out << '\n';
  for (Eigen::Index r = 0; r < h.aggregate.size(); ++r) {
    out << h.aggregate.timestamps[r] << ',' << h.aggregate.timestamps[r] << ','
        << h.aggregate.values[r];
    for (std::size_t a = 0; a < 9; ++a) {
      out << ',';
      if (a < h.appliances.size()) out << h.appliances[a].values[r];
      else out << 0;
    }
    out << '\n';
  }
}

}  // namespace nilm
