#pragma once

#include <vector>

#include "pacc/error.hpp"

namespace pacc::data {

// Min-max normalization fitted on training labels only; validation and test
// values pass through the same affine map and may land outside [0, 1].
struct LabelTransform {
  double min = 0.0;
  double max = 1.0;
  bool fitted = false;

  static LabelTransform fit(const std::vector<double>& train_labels);
  double apply(double log_ic50) const;
  double invert(double normalized) const;
};

// Per-gene z-score with train-fitted statistics (population std, floored at
// 1e-8 so constant genes map to zero).
struct ExpressionTransform {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool fitted = false;

  static ExpressionTransform fit(const std::vector<std::vector<double>>& train_cells);
  std::vector<double> apply(const std::vector<double>& cell) const;
};

}  // namespace pacc::data
