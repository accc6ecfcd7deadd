#include "pacc/data/transform.hpp"

#include <cmath>
#include <set>

namespace pacc::data {

LabelTransform LabelTransform::fit(const std::vector<double>& train_labels) {
  std::set<double> distinct(train_labels.begin(), train_labels.end());
  if (distinct.size() < 2)
    throw Error("DegenerateRange", "label transform needs >= 2 distinct training labels");
  LabelTransform t;
  t.min = *distinct.begin();
  t.max = *distinct.rbegin();
  t.fitted = true;
  return t;
}

double LabelTransform::apply(double log_ic50) const {
  if (!fitted) throw Error("TransformNotFitted", "label transform used before fit");
  return (log_ic50 - min) / (max - min);
}

double LabelTransform::invert(double normalized) const {
  if (!fitted) throw Error("TransformNotFitted", "label transform used before fit");
  return normalized * (max - min) + min;
}

ExpressionTransform ExpressionTransform::fit(
    const std::vector<std::vector<double>>& train_cells) {
  if (train_cells.size() < 2)
    throw Error("TooFewCells", "expression transform needs >= 2 training cells");
  const size_t genes = train_cells[0].size();
  ExpressionTransform t;
  t.mean.assign(genes, 0.0);
  t.stddev.assign(genes, 0.0);
  for (const auto& cell : train_cells) {
    if (cell.size() != genes)
      throw Error("ShapeMismatch", "expression rows have unequal gene counts");
    for (size_t j = 0; j < genes; ++j) t.mean[j] += cell[j];
  }
  for (size_t j = 0; j < genes; ++j) t.mean[j] /= static_cast<double>(train_cells.size());
  for (const auto& cell : train_cells)
    for (size_t j = 0; j < genes; ++j) {
      const double d = cell[j] - t.mean[j];
      t.stddev[j] += d * d;
    }
  for (size_t j = 0; j < genes; ++j) {
    t.stddev[j] = std::sqrt(t.stddev[j] / static_cast<double>(train_cells.size()));
    if (t.stddev[j] < 1e-8) t.stddev[j] = 1e-8;
  }
  t.fitted = true;
  return t;
}

std::vector<double> ExpressionTransform::apply(const std::vector<double>& cell) const {
  if (!fitted) throw Error("TransformNotFitted", "expression transform used before fit");
  if (cell.size() != mean.size())
    throw Error("ShapeMismatch", "expression row width disagrees with the fitted transform");
  std::vector<double> out(cell.size());
  for (size_t j = 0; j < cell.size(); ++j) out[j] = (cell[j] - mean[j]) / stddev[j];
  return out;
}

}  // namespace pacc::data
