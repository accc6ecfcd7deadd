#pragma once

#include <vector>

#include "pacc/data/transform.hpp"
#include "pacc/error.hpp"

namespace pacc::train {

struct MetricReport {
  double rmse = 0.0;      // normalized label scale
  double rmse_log = 0.0;  // log-IC50 scale
  double pearson = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;  // false when the truth is constant
  int count = 0;
};

double rmse(const std::vector<double>& pred, const std::vector<double>& truth);
double pearson(const std::vector<double>& pred, const std::vector<double>& truth,
               bool* defined = nullptr);
double r_squared(const std::vector<double>& pred, const std::vector<double>& truth,
                 bool* defined = nullptr);

// Metrics over normalized-scale predictions; rmse_log is computed after
// inverting both sides through the label transform. Pearson and R2 are
// affine-invariant, so the scale does not matter for them.
MetricReport compute_metrics(const std::vector<double>& pred_norm,
                             const std::vector<double>& truth_norm,
                             const data::LabelTransform& transform);

// Linear-interpolation quantile (the numpy default); p in [0, 1].
double quantile(std::vector<double> values, double p);
double median(const std::vector<double>& values);
double iqr(const std::vector<double>& values);

}  // namespace pacc::train
