#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/tensor.hpp"

namespace nilm {

struct TimeSeries {
  std::vector<std::int64_t> timestamps;  // unix seconds, nondecreasing
  Vector values;                         // watts
  std::string label;
  std::vector<char> gap_after;  // gap_after[i]: flagged jump between i and i+1

  Eigen::Index size() const { return values.size(); }
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // floored at 1e-8
};

struct WindowedDataset {
  Matrix inputs;   // (N, W) normalized mains windows
  Matrix targets;  // (N, W) normalized appliance windows
  NormStats input_stats, target_stats;
  int window_len = 0;
  int stride = 1;
};

struct ApplianceSpec {
  enum class Kind { Cyclic, Spike, Program };
  std::string name;
  Kind kind = Kind::Cyclic;
  double power = 100.0;  // watts while on
  int on_min = 1, on_max = 1;
  int off_min = 1, off_max = 1;
};

struct SyntheticConfig {
  Eigen::Index duration_samples = 0;
  std::vector<ApplianceSpec> appliances;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::int64_t start_unix = 0;
  int sample_period_s = 8;
};

struct RefitLoad {
  TimeSeries aggregate;
  TimeSeries appliance;
  long dropped_rows = 0;
};

// Columns: Time,Unix,Aggregate,Appliance1..Appliance9. Rows with a missing
// or unparseable value in either used column are dropped and counted.
RefitLoad load_refit_csv(const std::string& path, int appliance_column);

// Mean and population standard deviation over [begin, end).
NormStats compute_norm_stats(const Vector& values, Eigen::Index begin,
                             Eigen::Index end);
inline NormStats compute_norm_stats(const Vector& values) {
  return compute_norm_stats(values, 0, values.size());
}

inline double normalize(double watts, const NormStats& s) {
  return (watts - s.mean) / s.std;
}
inline double denormalize(double z, const NormStats& s) {
  return z * s.std + s.mean;
}
Vector normalize(const Vector& watts, const NormStats& s);
Vector denormalize(const Vector& z, const NormStats& s);

// Windows spanning a flagged timestamp gap are excluded.
WindowedDataset make_windows(const TimeSeries& mains,
                             const TimeSeries& appliance, int window_len,
                             int stride, const NormStats& input_stats,
                             const NormStats& target_stats);

std::pair<TimeSeries, TimeSeries> split_train_test(const TimeSeries& series,
                                                   double train_fraction = 0.7);

// Overlap-averaged recombination; denormalized and clamped at 0 W.
Vector stitch_predictions(const Matrix& window_preds, int stride,
                          Eigen::Index total_len,
                          const NormStats& target_stats);

struct SyntheticHousehold {
  TimeSeries aggregate;
  std::vector<TimeSeries> appliances;
};

SyntheticHousehold generate_synthetic(const SyntheticConfig& config);

// Timestamp gaps > 2x the nominal spacing get flagged.
void flag_gaps(TimeSeries& series, std::int64_t nominal_spacing_s = 8);

void write_series_csv(const std::string& path, const TimeSeries& series);
TimeSeries read_series_csv(const std::string& path);
void write_series_json(const std::string& path, const TimeSeries& series);

// Synthetic household in the REFIT CSV layout, readable by load_refit_csv.
void write_refit_csv(const std::string& path, const SyntheticHousehold& h);

}  // namespace nilm
