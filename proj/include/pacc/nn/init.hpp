#pragma once

#include <cmath>
#include <vector>

#include "pacc/nn/tensor.hpp"
#include "pacc/rng.hpp"

namespace pacc::nn {

// Glorot-uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename S>
Tensor<S> init_dense(Graph<S>& g, int fan_in, int fan_out, RngStream& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<S> vals(static_cast<size_t>(fan_in) * fan_out);
  for (S& v : vals) v = S(rng.uniform(-bound, bound));
  return g.leaf({fan_in, fan_out}, std::move(vals), true);
}

template <typename S>
Tensor<S> init_conv(Graph<S>& g, int k, int c_in, int c_out, RngStream& rng) {
  const double bound = std::sqrt(6.0 / (k * c_in + c_out));
  std::vector<S> vals(static_cast<size_t>(k) * c_in * c_out);
  for (S& v : vals) v = S(rng.uniform(-bound, bound));
  return g.leaf({k, c_in, c_out}, std::move(vals), true);
}

template <typename S>
Tensor<S> init_zeros(Graph<S>& g, std::vector<int> shape) {
  auto n = shape_numel(shape);
  return g.leaf(std::move(shape), std::vector<S>(static_cast<size_t>(n), S(0)), true);
}

template <typename S>
Tensor<S> init_embedding(Graph<S>& g, int vocab, int h, RngStream& rng) {
  std::vector<S> vals(static_cast<size_t>(vocab) * h);
  for (S& v : vals) v = S(rng.uniform(-0.05, 0.05));
  return g.leaf({vocab, h}, std::move(vals), true);
}

// Square orthogonal matrix via modified Gram-Schmidt on a random matrix,
// computed in double so the result is identical for float and double
// instantiations of the same seed.
template <typename S>
Tensor<S> init_orthogonal(Graph<S>& g, int n, RngStream& rng) {
  std::vector<double> m(static_cast<size_t>(n) * n);
  for (double& v : m) v = rng.uniform(-1.0, 1.0);
  for (int c = 0; c < n; ++c) {
    for (int prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (int r = 0; r < n; ++r)
        dot += m[static_cast<size_t>(r) * n + c] * m[static_cast<size_t>(r) * n + prev];
      for (int r = 0; r < n; ++r)
        m[static_cast<size_t>(r) * n + c] -= dot * m[static_cast<size_t>(r) * n + prev];
    }
    double norm = 0.0;
    for (int r = 0; r < n; ++r) {
      const double v = m[static_cast<size_t>(r) * n + c];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) norm = 1.0;  // degenerate column, leave unscaled
    for (int r = 0; r < n; ++r) m[static_cast<size_t>(r) * n + c] /= norm;
  }
  std::vector<S> vals(m.size());
  for (size_t i = 0; i < m.size(); ++i) vals[i] = S(m[i]);
  return g.leaf({n, n}, std::move(vals), true);
}

}  // namespace pacc::nn
