#pragma once

#include <string>
#include <vector>

#include "nilm/tensor.hpp"

namespace nilm {

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

struct ApplianceMetrics {
  std::string name;
  double ane = 0.0;
  double rmse = 0.0;      // watts
  double accuracy = 0.0;  // fraction
  double f1 = 0.0;        // fraction
  ConfusionCounts counts;
  long n_points = 0;
};

struct MetricsReport {
  std::vector<ApplianceMetrics> per_appliance;
  ApplianceMetrics overall;  // unweighted means across appliances
};

double rmse(const Vector& truth, const Vector& pred);

// |sum truth - sum pred| / sum truth
double ane(const Vector& truth, const Vector& pred);

// ON iff value > threshold (strict)
std::vector<bool> on_off_states(const Vector& series, double threshold);

ConfusionCounts confusion(const std::vector<bool>& truth_states,
                          const std::vector<bool>& pred_states);

double accuracy(const ConfusionCounts& c);

// 0 when tp == 0, covering the 0/0 denominators
double f1(const ConfusionCounts& c);

ApplianceMetrics evaluate_appliance(const Vector& truth, const Vector& pred,
                                    double threshold,
                                    const std::string& name = "");

ApplianceMetrics aggregate_overall(
    const std::vector<ApplianceMetrics>& per_appliance);

MetricsReport make_report(const std::vector<ApplianceMetrics>& per_appliance);

std::string report_to_json(const MetricsReport& report);
// CSV table: metric rows, appliance columns plus an Overall column
std::string report_to_csv(const MetricsReport& report);

}  // namespace nilm
