#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pacc/nn/tensor.hpp"

namespace pacc::nn {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;

  bool below(double tol) const { return worst < tol; }
};

// Central finite differences in 64-bit with step h per scalar. `build` must
// construct the graph from scratch and return the scalar loss; parameters
// are shared across calls so perturbations are visible.
inline GradCheckReport grad_check(
    const std::function<Tensor<double>(Graph<double>&)>& build,
    const std::vector<NamedTensor<double>>& params, double h = 1e-5) {
  // Analytic gradients.
  std::vector<std::vector<double>> analytic(params.size());
  {
    Graph<double> g;
    for (const auto& p : params) p.tensor->zero_grad();
    auto loss = build(g);
    if (loss->numel() != 1) throw Error("ShapeMismatch", "grad_check loss must be scalar");
    g.backward(loss);
    for (size_t p = 0; p < params.size(); ++p) analytic[p] = params[p].tensor->grad;
  }

  auto eval = [&]() {
    Graph<double> g;
    return build(g)->value[0];
  };

  GradCheckReport report;
  for (size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry;
    entry.name = params[p].name;
    auto& vals = params[p].tensor->value;
    for (size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double up = eval();
      vals[i] = saved - h;
      const double down = eval();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pacc::nn
