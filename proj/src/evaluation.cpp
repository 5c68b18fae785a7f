#include "nilm/evaluation.hpp"

#include <sstream>

#include <json.hpp>

namespace nilm {

double rmse(const Vector& truth, const Vector& pred) {
  if (truth.size() != pred.size())
    throw ShapeError("rmse: length mismatch (" + std::to_string(truth.size()) +
                     " vs " + std::to_string(pred.size()) + ")");
  if (truth.size() == 0) throw std::invalid_argument("rmse: empty series");
  return std::sqrt((truth - pred).array().square().mean());
}

double ane(const Vector& truth, const Vector& pred) {
  if (truth.size() != pred.size())
    throw ShapeError("ane: length mismatch (" + std::to_string(truth.size()) +
                     " vs " + std::to_string(pred.size()) + ")");
  const double total = truth.sum();
  if (total <= 0.0)
    throw std::invalid_argument("ane: total true energy must be > 0");
  return std::abs(total - pred.sum()) / total;
}

std::vector<bool> on_off_states(const Vector& series, double threshold) {
  std::vector<bool> states(series.size());
  for (Eigen::Index i = 0; i < series.size(); ++i)
    states[i] = series[i] > threshold;
  return states;
}

ConfusionCounts confusion(const std::vector<bool>& truth_states,
                          const std::vector<bool>& pred_states) {
  if (truth_states.size() != pred_states.size())
    throw ShapeError("confusion: length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth_states.size(); ++i) {
    if (truth_states[i])
      pred_states[i] ? ++c.tp : ++c.fn;
    else
      pred_states[i] ? ++c.fp : ++c.tn;
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("accuracy: zero total");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double f1(const ConfusionCounts& c) {
  if (c.tp == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  return 2.0 * precision * recall / (precision + recall);
}

ApplianceMetrics evaluate_appliance(const Vector& truth, const Vector& pred,
                                    double threshold,
                                    const std::string& name) {
  ApplianceMetrics m;
  m.name = name;
  m.rmse = rmse(truth, pred);
  m.ane = ane(truth, pred);
  m.counts = confusion(on_off_states(truth, threshold),
                       on_off_states(pred, threshold));
  m.accuracy = accuracy(m.counts);
  m.f1 = f1(m.counts);
  m.n_points = truth.size();
  return m;
}

ApplianceMetrics aggregate_overall(
    const std::vector<ApplianceMetrics>& per_appliance) {
  if (per_appliance.empty())
    throw std::invalid_argument("aggregate_overall: empty list");
  ApplianceMetrics overall;
  overall.name = "Overall";
  for (const auto& m : per_appliance) {
    overall.ane += m.ane;
    overall.rmse += m.rmse;
    overall.accuracy += m.accuracy;
    overall.f1 += m.f1;
    overall.counts.tp += m.counts.tp;
    overall.counts.fp += m.counts.fp;
    overall.counts.tn += m.counts.tn;
    overall.counts.fn += m.counts.fn;
    overall.n_points += m.n_points;
  }
  const double k = static_cast<double>(per_appliance.size());
  overall.ane /= k;
  overall.rmse /= k;
  overall.accuracy /= k;
  overall.f1 /= k;
  return overall;
}

MetricsReport make_report(const std::vector<ApplianceMetrics>& per_appliance) {
  MetricsReport r;
  r.per_appliance = per_appliance;
  r.overall = aggregate_overall(per_appliance);
  return r;
}

namespace {

nlohmann::json metrics_json(const ApplianceMetrics& m) {
  return {
      {"name", m.name},
      {"ane", m.ane},
      {"rmse", m.rmse},
      {"accuracy", m.accuracy},
      {"f1", m.f1},
      {"n_points", m.n_points},
      {"counts",
       {{"tp", m.counts.tp}, {"fp", m.counts.fp},
        {"tn", m.counts.tn}, {"fn", m.counts.fn}}},
  };
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  for (const auto& m : report.per_appliance)
    j["appliances"].push_back(metrics_json(m));
  j["overall"] = metrics_json(report.overall);
  return j.dump(2);
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "Metrics";
  for (const auto& m : report.per_appliance) out << ',' << m.name;
  out << ",Overall\n";
  auto row = [&](const char* label, auto field) {
    out << label;
    for (const auto& m : report.per_appliance) out << ',' << field(m);
    out << ',' << field(report.overall) << '\n';
  };
  row("ANE", [](const ApplianceMetrics& m) { return m.ane; });
  row("RMSE", [](const ApplianceMetrics& m) { return m.rmse; });
  row("Accuracy", [](const ApplianceMetrics& m) { return m.accuracy; });
  row("F1", [](const ApplianceMetrics& m) { return m.f1; });
  return out.str();
}

}  // namespace nilm
