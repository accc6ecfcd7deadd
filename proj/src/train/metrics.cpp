#include "pacc/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pacc::train {

namespace {

void check_lengths(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error("ShapeMismatch", "metric inputs have unequal lengths");
  if (a.size() < 2) throw Error("TooFewSamples", "metrics need >= 2 samples");
}

}  // namespace

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_lengths(pred, truth);
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double pearson(const std::vector<double>& pred, const std::vector<double>& truth,
               bool* defined) {
  check_lengths(pred, truth);
  const double n = static_cast<double>(pred.size());
  double mp = 0.0, mt = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mt += truth[i];
  }
  mp /= n;
  mt /= n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp, dt = truth[i] - mt;
    cov += dp * dt;
    vp += dp * dp;
    vt += dt * dt;
  }
  if (vp == 0.0 || vt == 0.0) {
    if (defined) *defined = false;
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (defined) *defined = true;
  return cov / std::sqrt(vp * vt);
}

double r_squared(const std::vector<double>& pred, const std::vector<double>& truth,
                 bool* defined) {
  check_lengths(pred, truth);
  double mt = 0.0;
  for (double t : truth) mt += t;
  mt /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mt) * (truth[i] - mt);
  }
  if (ss_tot == 0.0) {
    if (defined) *defined = false;
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (defined) *defined = true;
  return 1.0 - ss_res / ss_tot;
}

MetricReport compute_metrics(const std::vector<double>& pred_norm,
                             const std::vector<double>& truth_norm,
                             const data::LabelTransform& transform) {
  MetricReport report;
  report.count = static_cast<int>(pred_norm.size());
  report.rmse = rmse(pred_norm, truth_norm);
  std::vector<double> pred_log(pred_norm.size()), truth_log(truth_norm.size());
  for (size_t i = 0; i < pred_norm.size(); ++i) {
    pred_log[i] = transform.invert(pred_norm[i]);
    truth_log[i] = transform.invert(truth_norm[i]);
  }
  report.rmse_log = rmse(pred_log, truth_log);
  bool pearson_defined = true;
  report.pearson = pearson(pred_norm, truth_norm, &pearson_defined);
  report.r2 = r_squared(pred_norm, truth_norm, &report.r2_defined);
  if (!pearson_defined) report.r2_defined = false;
  return report;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("TooFewSamples", "quantile of an empty vector");
  if (p < 0.0 || p > 1.0) throw Error("InvalidQuantile", "p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(h);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(const std::vector<double>& values) { return quantile(values, 0.5); }

double iqr(const std::vector<double>& values) {
  return quantile(values, 0.75) - quantile(values, 0.25);
}

}  // namespace pacc::train
