#pragma once

#include <vector>

#include "pacc/nn/ops.hpp"

namespace pacc::nn {

// z = sigmoid(x Wz + h Uz + bz); r = sigmoid(x Wr + h Ur + br);
// htilde = tanh(x Wh + (r . h) Uh + bh); h' = (1 - z) . h + z . htilde.
template <typename S>
struct GruCell {
  Tensor<S> wz, uz, bz;
  Tensor<S> wr, ur, br;
  Tensor<S> wh, uh, bh;
  int input = 0, hidden = 0;
};

template <typename S>
struct BiGruParams {
  // Two stacked bidirectional layers; layer 2 consumes the concatenated
  // per-step outputs of layer 1.
  GruCell<S> fwd1, bwd1, fwd2, bwd2;
  int hidden = 0;
};

template <typename S>
Tensor<S> gru_step(Graph<S>& g, const GruCell<S>& cell, const Tensor<S>& x_t,
                   const Tensor<S>& h_prev) {
  auto z = apply_activation(
      g, add(g, linear(g, x_t, cell.wz, cell.bz), matmul(g, h_prev, cell.uz)),
      Activation::kSigmoid);
  auto r = apply_activation(
      g, add(g, linear(g, x_t, cell.wr, cell.br), matmul(g, h_prev, cell.ur)),
      Activation::kSigmoid);
  auto htilde = apply_activation(
      g, add(g, linear(g, x_t, cell.wh, cell.bh), matmul(g, mul(g, r, h_prev), cell.uh)),
      Activation::kTanh);
  auto keep = mul(g, z, htilde);
  auto carry = mul(g, scale_add(g, z, S(-1), S(1)), h_prev);
  return add(g, carry, keep);
}

// Runs one direction over precomputed per-step inputs. State updates happen
// only at valid positions; padded steps carry the previous state through.
// Returns the per-step states (after masking).
template <typename S>
std::vector<Tensor<S>> gru_scan(Graph<S>& g, const GruCell<S>& cell,
                                const std::vector<Tensor<S>>& steps,
                                const std::vector<uint8_t>& pad_mask, int batch,
                                bool backward_direction) {
  const int t_len = static_cast<int>(steps.size());
  std::vector<Tensor<S>> states(t_len);
  Tensor<S> h = g.leaf({batch, cell.hidden},
                       std::vector<S>(static_cast<size_t>(batch) * cell.hidden, S(0)), false);
  for (int k = 0; k < t_len; ++k) {
    const int t = backward_direction ? t_len - 1 - k : k;
    auto h_new = gru_step(g, cell, steps[t], h);
    std::vector<uint8_t> keep(batch);
    for (int b = 0; b < batch; ++b) keep[b] = pad_mask[static_cast<size_t>(b) * t_len + t];
    h = lerp_rows(g, h_new, h, keep);
    states[t] = h;
  }
  return states;
}

// 2-layer bidirectional GRU. Input x: [B, T, H]; pad_mask: [B * T] with
// trailing pads only. Output: concatenated final forward state (after the
// last valid token) and final backward state (after position 0) of the top
// layer, shape [B, 2 * hidden].
template <typename S>
Tensor<S> bigru_forward(Graph<S>& g, const Tensor<S>& x, const BiGruParams<S>& params,
                        const std::vector<uint8_t>& pad_mask) {
  detail::require(x->shape.size() == 3, "ShapeMismatch", "bigru input must be [B, T, H]");
  const int batch = x->shape[0], t_len = x->shape[1];
  detail::require(static_cast<int>(pad_mask.size()) == batch * t_len, "ShapeMismatch",
                  "pad mask must have batch * T entries");

  std::vector<Tensor<S>> inputs(t_len);
  for (int t = 0; t < t_len; ++t) inputs[t] = slice_time(g, x, t);

  auto f1 = gru_scan(g, params.fwd1, inputs, pad_mask, batch, false);
  auto b1 = gru_scan(g, params.bwd1, inputs, pad_mask, batch, true);

  std::vector<Tensor<S>> merged(t_len);
  for (int t = 0; t < t_len; ++t) merged[t] = concat_cols(g, {f1[t], b1[t]});

  auto f2 = gru_scan(g, params.fwd2, merged, pad_mask, batch, false);
  auto b2 = gru_scan(g, params.bwd2, merged, pad_mask, batch, true);

  return concat_cols(g, {f2[t_len - 1], b2[0]});
}

}  // namespace pacc::nn
