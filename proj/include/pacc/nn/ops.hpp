#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pacc/nn/tensor.hpp"
#include "pacc/rng.hpp"

namespace pacc::nn {

namespace detail {

template <typename S>
S activate(S z, Activation act) {
  switch (act) {
    case Activation::kLinear: return z;
    case Activation::kSigmoid: return S(1) / (S(1) + std::exp(-z));
    case Activation::kRelu: return z > S(0) ? z : S(0);
    case Activation::kTanh: return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the activation output.
template <typename S>
S activate_grad_from_output(S y, Activation act) {
  switch (act) {
    case Activation::kLinear: return S(1);
    case Activation::kSigmoid: return y * (S(1) - y);
    case Activation::kRelu: return y > S(0) ? S(1) : S(0);
    case Activation::kTanh: return S(1) - y * y;
  }
  return S(1);
}

inline void require(bool cond, const char* code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> apply_activation(Graph<S>& g, const Tensor<S>& x, Activation act) {
  auto out = g.make(x->shape);
  for (size_t i = 0; i < x->value.size(); ++i)
    out->value[i] = detail::activate(x->value[i], act);
  g.record([x, out, act]() {
    if (!x->requires_grad) return;
    for (size_t i = 0; i < x->value.size(); ++i)
      x->grad[i] += out->grad[i] * detail::activate_grad_from_output(out->value[i], act);
  });
  return out;
}

template <typename S>
Tensor<S> add(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a->shape == b->shape, "ShapeMismatch", "add requires equal shapes");
  auto out = g.make(a->shape);
  for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] + b->value[i];
  g.record([a, b, out]() {
    if (a->requires_grad)
      for (size_t i = 0; i < a->value.size(); ++i) a->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (size_t i = 0; i < b->value.size(); ++i) b->grad[i] += out->grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> mul(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require(a->shape == b->shape, "ShapeMismatch", "mul requires equal shapes");
  auto out = g.make(a->shape);
  for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] * b->value[i];
  g.record([a, b, out]() {
    if (a->requires_grad)
      for (size_t i = 0; i < a->value.size(); ++i) a->grad[i] += out->grad[i] * b->value[i];
    if (b->requires_grad)
      for (size_t i = 0; i < b->value.size(); ++i) b->grad[i] += out->grad[i] * a->value[i];
  });
  return out;
}

// out = alpha * x + beta, elementwise.
template <typename S>
Tensor<S> scale_add(Graph<S>& g, const Tensor<S>& x, S alpha, S beta) {
  auto out = g.make(x->shape);
  for (size_t i = 0; i < x->value.size(); ++i) out->value[i] = alpha * x->value[i] + beta;
  g.record([x, out, alpha]() {
    if (!x->requires_grad) return;
    for (size_t i = 0; i < x->value.size(); ++i) x->grad[i] += alpha * out->grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> reshape(Graph<S>& g, const Tensor<S>& x, std::vector<int> shape) {
  detail::require(shape_numel(shape) == x->numel(), "ShapeMismatch",
                  "reshape must preserve element count");
  auto out = g.make(std::move(shape));
  out->value = x->value;
  g.record([x, out]() {
    if (!x->requires_grad) return;
    for (size_t i = 0; i < x->value.size(); ++i) x->grad[i] += out->grad[i];
  });
  return out;
}

// Concatenates along the last axis; all inputs share leading dimensions.
template <typename S>
Tensor<S> concat_cols(Graph<S>& g, const std::vector<Tensor<S>>& xs) {
  detail::require(!xs.empty(), "ShapeMismatch", "concat of nothing");
  const int rows = static_cast<int>(xs[0]->numel() / xs[0]->shape.back());
  int total = 0;
  for (const auto& x : xs) {
    detail::require(static_cast<int>(x->numel() / x->shape.back()) == rows, "ShapeMismatch",
                    "concat inputs disagree on row count");
    total += x->shape.back();
  }
  std::vector<int> shape = xs[0]->shape;
  shape.back() = total;
  auto out = g.make(std::move(shape));
  int offset = 0;
  for (const auto& x : xs) {
    const int c = x->shape.back();
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j)
        out->value[static_cast<size_t>(r) * total + offset + j] =
            x->value[static_cast<size_t>(r) * c + j];
    offset += c;
  }
  g.record([xs, out, rows, total]() {
    int off = 0;
    for (const auto& x : xs) {
      const int c = x->shape.back();
      if (x->requires_grad)
        for (int r = 0; r < rows; ++r)
          for (int j = 0; j < c; ++j)
            x->grad[static_cast<size_t>(r) * c + j] +=
                out->grad[static_cast<size_t>(r) * total + off + j];
      off += c;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

// x: [..., K] treated as [rows, K]; w: [K, N]. Output replaces the last axis
// by N. Row results accumulate over k in ascending order, independent of the
// row count, which keeps eval-mode outputs identical across batch layouts.
template <typename S>
Tensor<S> matmul(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& w) {
  detail::require(w->shape.size() == 2, "ShapeMismatch", "matmul weight must be 2-D");
  const int k = w->shape[0], n = w->shape[1];
  detail::require(x->shape.back() == k, "ShapeMismatch",
                  "matmul inner dimensions disagree: " + std::to_string(x->shape.back()) +
                      " vs " + std::to_string(k));
  const int rows = static_cast<int>(x->numel() / k);
  std::vector<int> shape = x->shape;
  shape.back() = n;
  auto out = g.make(std::move(shape));
  for (int r = 0; r < rows; ++r) {
    S* orow = out->value.data() + static_cast<size_t>(r) * n;
    const S* xrow = x->value.data() + static_cast<size_t>(r) * k;
    for (int kk = 0; kk < k; ++kk) {
      const S xv = xrow[kk];
      if (xv == S(0)) continue;
      const S* wrow = w->value.data() + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += xv * wrow[j];
    }
  }
  g.record([x, w, out, rows, k, n]() {
    if (x->requires_grad) {
      for (int r = 0; r < rows; ++r) {
        S* xg = x->grad.data() + static_cast<size_t>(r) * k;
        const S* og = out->grad.data() + static_cast<size_t>(r) * n;
        for (int kk = 0; kk < k; ++kk) {
          const S* wrow = w->value.data() + static_cast<size_t>(kk) * n;
          S acc = S(0);
          for (int j = 0; j < n; ++j) acc += og[j] * wrow[j];
          xg[kk] += acc;
        }
      }
    }
    if (w->requires_grad) {
      for (int r = 0; r < rows; ++r) {
        const S* xrow = x->value.data() + static_cast<size_t>(r) * k;
        const S* og = out->grad.data() + static_cast<size_t>(r) * n;
        for (int kk = 0; kk < k; ++kk) {
          const S xv = xrow[kk];
          if (xv == S(0)) continue;
          S* wg = w->grad.data() + static_cast<size_t>(kk) * n;
          for (int j = 0; j < n; ++j) wg[j] += xv * og[j];
        }
      }
    }
  });
  return out;
}

// Broadcast-adds a [N] bias over the rows of x: [..., N].
template <typename S>
Tensor<S> add_bias(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& b) {
  const int n = x->shape.back();
  detail::require(b->numel() == n, "ShapeMismatch", "bias length must equal the last axis");
  const int rows = static_cast<int>(x->numel() / n);
  auto out = g.make(x->shape);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j)
      out->value[static_cast<size_t>(r) * n + j] =
          x->value[static_cast<size_t>(r) * n + j] + b->value[j];
  g.record([x, b, out, rows, n]() {
    if (x->requires_grad)
      for (size_t i = 0; i < x->value.size(); ++i) x->grad[i] += out->grad[i];
    if (b->requires_grad)
      for (int r = 0; r < rows; ++r)
        for (int j = 0; j < n; ++j) b->grad[j] += out->grad[static_cast<size_t>(r) * n + j];
  });
  return out;
}

template <typename S>
Tensor<S> linear(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  auto y = matmul(g, x, w);
  return b ? add_bias(g, y, b) : y;
}

// activation(x W + b), the dense layer primitive.
template <typename S>
Tensor<S> dense_forward(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                        Activation act) {
  return apply_activation(g, linear(g, x, w, b), act);
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

// ids: flat [batch * T]; table: [vocab, H]. Output [batch, T, H]. Gradients
// scatter additively, so repeated ids accumulate.
template <typename S>
Tensor<S> embedding_forward(Graph<S>& g, const std::vector<int>& ids, int batch, int t_len,
                            const Tensor<S>& table) {
  detail::require(static_cast<int>(ids.size()) == batch * t_len, "ShapeMismatch",
                  "id count must equal batch * T");
  const int vocab = table->shape[0], h = table->shape[1];
  for (int id : ids)
    detail::require(id >= 0 && id < vocab, "IndexOutOfVocab",
                    "token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(vocab));
  auto out = g.make({batch, t_len, h});
  for (size_t p = 0; p < ids.size(); ++p)
    std::copy_n(table->value.data() + static_cast<size_t>(ids[p]) * h, h,
                out->value.data() + p * h);
  g.record([ids, table, out, h]() {
    if (!table->requires_grad) return;
    for (size_t p = 0; p < ids.size(); ++p) {
      S* tg = table->grad.data() + static_cast<size_t>(ids[p]) * h;
      const S* og = out->grad.data() + p * h;
      for (int j = 0; j < h; ++j) tg[j] += og[j];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

// Same-length 1-D convolution over [batch, T, C_in] with kernels
// [K, C_in, C_out] and zero padding of (K-1)/2 on both ends. K must be odd.
template <typename S>
Tensor<S> conv1d_forward(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& kernels,
                         const Tensor<S>& bias, Activation act) {
  detail::require(x->shape.size() == 3, "ShapeMismatch", "conv1d input must be [B, T, C]");
  detail::require(kernels->shape.size() == 3, "ShapeMismatch",
                  "conv1d kernels must be [K, C_in, C_out]");
  const int batch = x->shape[0], t_len = x->shape[1], c_in = x->shape[2];
  const int k = kernels->shape[0], c_out = kernels->shape[2];
  detail::require(k % 2 == 1, "EvenKernel", "same-padding requires an odd kernel width");
  detail::require(kernels->shape[1] == c_in, "ShapeMismatch",
                  "conv1d kernel C_in disagrees with input");
  detail::require(!bias || bias->numel() == c_out, "ShapeMismatch", "conv1d bias length");
  const int half = (k - 1) / 2;

  auto pre = g.make({batch, t_len, c_out});
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < t_len; ++t) {
      S* orow = pre->value.data() + (static_cast<size_t>(b) * t_len + t) * c_out;
      if (bias)
        for (int co = 0; co < c_out; ++co) orow[co] = bias->value[co];
      for (int j = 0; j < k; ++j) {
        const int s = t + j - half;
        if (s < 0 || s >= t_len) continue;  // zero padding contributes nothing
        const S* xrow = x->value.data() + (static_cast<size_t>(b) * t_len + s) * c_in;
        const S* krow = kernels->value.data() + static_cast<size_t>(j) * c_in * c_out;
        for (int ci = 0; ci < c_in; ++ci) {
          const S xv = xrow[ci];
          if (xv == S(0)) continue;
          const S* kk = krow + static_cast<size_t>(ci) * c_out;
          for (int co = 0; co < c_out; ++co) orow[co] += xv * kk[co];
        }
      }
    }
  }
  g.record([x, kernels, bias, pre, batch, t_len, c_in, k, c_out, half]() {
    for (int b = 0; b < batch; ++b) {
      for (int t = 0; t < t_len; ++t) {
        const S* og = pre->grad.data() + (static_cast<size_t>(b) * t_len + t) * c_out;
        if (bias && bias->requires_grad)
          for (int co = 0; co < c_out; ++co) bias->grad[co] += og[co];
        for (int j = 0; j < k; ++j) {
          const int s = t + j - half;
          if (s < 0 || s >= t_len) continue;
          const S* xrow = x->value.data() + (static_cast<size_t>(b) * t_len + s) * c_in;
          const S* krow = kernels->value.data() + static_cast<size_t>(j) * c_in * c_out;
          S* xg = x->requires_grad
                      ? x->grad.data() + (static_cast<size_t>(b) * t_len + s) * c_in
                      : nullptr;
          for (int ci = 0; ci < c_in; ++ci) {
            const S* kk = krow + static_cast<size_t>(ci) * c_out;
            if (xg) {
              S acc = S(0);
              for (int co = 0; co < c_out; ++co) acc += og[co] * kk[co];
              xg[ci] += acc;
            }
            if (kernels->requires_grad) {
              S* kg = kernels->grad.data() +
                      (static_cast<size_t>(j) * c_in + ci) * c_out;
              const S xv = xrow[ci];
              if (xv != S(0))
                for (int co = 0; co < c_out; ++co) kg[co] += xv * og[co];
            }
          }
        }
      }
    }
  });
  return apply_activation(g, pre, act);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

// Max-subtracted softmax over the last axis. Masked positions (mask 0) get
// exactly zero and are excluded from the normalizer. mask may be null.
template <typename S>
Tensor<S> softmax_masked(Graph<S>& g, const Tensor<S>& logits,
                         const std::vector<uint8_t>* mask) {
  const int n = logits->shape.back();
  const int rows = static_cast<int>(logits->numel() / n);
  detail::require(!mask || static_cast<int64_t>(mask->size()) == logits->numel(),
                  "ShapeMismatch", "softmax mask must match the logits");
  auto out = g.make(logits->shape);
  for (int r = 0; r < rows; ++r) {
    const S* lrow = logits->value.data() + static_cast<size_t>(r) * n;
    const uint8_t* mrow = mask ? mask->data() + static_cast<size_t>(r) * n : nullptr;
    S mx = S(0);
    bool any = false;
    for (int j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      mx = any ? std::max(mx, lrow[j]) : lrow[j];
      any = true;
    }
    detail::require(any, "AllMasked", "softmax row " + std::to_string(r) +
                                          " has no unmasked position");
    S denom = S(0);
    S* orow = out->value.data() + static_cast<size_t>(r) * n;
    for (int j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) {
        orow[j] = S(0);
        continue;
      }
      orow[j] = std::exp(lrow[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < n; ++j)
      if (!mrow || mrow[j]) orow[j] /= denom;
  }
  std::vector<uint8_t> mask_copy = mask ? *mask : std::vector<uint8_t>();
  g.record([logits, out, rows, n, mask_copy]() {
    if (!logits->requires_grad) return;
    const bool has_mask = !mask_copy.empty();
    for (int r = 0; r < rows; ++r) {
      const S* a = out->value.data() + static_cast<size_t>(r) * n;
      const S* og = out->grad.data() + static_cast<size_t>(r) * n;
      const uint8_t* mrow = has_mask ? mask_copy.data() + static_cast<size_t>(r) * n : nullptr;
      S dot = S(0);
      for (int j = 0; j < n; ++j) {
        if (mrow && !mrow[j]) continue;
        dot += a[j] * og[j];
      }
      S* lg = logits->grad.data() + static_cast<size_t>(r) * n;
      for (int j = 0; j < n; ++j) {
        if (mrow && !mrow[j]) continue;
        lg[j] += a[j] * (og[j] - dot);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename S>
struct BatchNorm {
  Tensor<S> gamma;  // learnable scale
  Tensor<S> beta;   // learnable shift
  std::vector<S> running_mean;
  std::vector<S> running_var;
  S momentum = S(0.99);
  S eps = S(1e-5);
};

template <typename S>
BatchNorm<S> make_batchnorm(Graph<S>& g, int features) {
  BatchNorm<S> bn;
  bn.gamma = g.leaf({features}, std::vector<S>(features, S(1)), true);
  bn.beta = g.leaf({features}, std::vector<S>(features, S(0)), true);
  bn.running_mean.assign(features, S(0));
  bn.running_var.assign(features, S(1));
  return bn;
}

// Train mode normalizes by batch statistics (population variance, floored by
// eps) and updates running stats; eval mode uses the running stats.
template <typename S>
Tensor<S> batchnorm_forward(Graph<S>& g, const Tensor<S>& x, BatchNorm<S>& bn, Mode mode) {
  detail::require(x->shape.size() == 2, "ShapeMismatch", "batchnorm input must be [B, F]");
  const int batch = x->shape[0], f = x->shape[1];
  detail::require(bn.gamma->numel() == f, "ShapeMismatch", "batchnorm feature count");
  auto out = g.make(x->shape);

  if (mode == Mode::kEval) {
    std::vector<S> inv_std(f);
    for (int j = 0; j < f; ++j) inv_std[j] = S(1) / std::sqrt(bn.running_var[j] + bn.eps);
    std::vector<S> mean = bn.running_mean;
    auto gamma = bn.gamma, beta = bn.beta;
    for (int b = 0; b < batch; ++b)
      for (int j = 0; j < f; ++j) {
        const size_t i = static_cast<size_t>(b) * f + j;
        out->value[i] =
            (x->value[i] - mean[j]) * inv_std[j] * gamma->value[j] + beta->value[j];
      }
    g.record([x, out, gamma, beta, inv_std, mean, batch, f]() {
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < f; ++j) {
          const size_t i = static_cast<size_t>(b) * f + j;
          const S xhat = (x->value[i] - mean[j]) * inv_std[j];
          if (gamma->requires_grad) gamma->grad[j] += out->grad[i] * xhat;
          if (beta->requires_grad) beta->grad[j] += out->grad[i];
          if (x->requires_grad) x->grad[i] += out->grad[i] * gamma->value[j] * inv_std[j];
        }
    });
    return out;
  }

  detail::require(batch >= 2, "BatchTooSmall", "batchnorm train mode needs batch >= 2");
  auto xhat = std::make_shared<std::vector<S>>(x->value.size());
  auto inv_std = std::make_shared<std::vector<S>>(f);
  for (int j = 0; j < f; ++j) {
    S mean = S(0);
    for (int b = 0; b < batch; ++b) mean += x->value[static_cast<size_t>(b) * f + j];
    mean /= S(batch);
    S var = S(0);
    for (int b = 0; b < batch; ++b) {
      const S d = x->value[static_cast<size_t>(b) * f + j] - mean;
      var += d * d;
    }
    var /= S(batch);
    (*inv_std)[j] = S(1) / std::sqrt(var + bn.eps);
    for (int b = 0; b < batch; ++b) {
      const size_t i = static_cast<size_t>(b) * f + j;
      (*xhat)[i] = (x->value[i] - mean) * (*inv_std)[j];
      out->value[i] = (*xhat)[i] * bn.gamma->value[j] + bn.beta->value[j];
    }
    bn.running_mean[j] = bn.momentum * bn.running_mean[j] + (S(1) - bn.momentum) * mean;
    bn.running_var[j] = bn.momentum * bn.running_var[j] + (S(1) - bn.momentum) * var;
  }
  auto gamma = bn.gamma, beta = bn.beta;
  g.record([x, out, gamma, beta, xhat, inv_std, batch, f]() {
    for (int j = 0; j < f; ++j) {
      S sum_dy = S(0), sum_dy_xhat = S(0);
      for (int b = 0; b < batch; ++b) {
        const size_t i = static_cast<size_t>(b) * f + j;
        sum_dy += out->grad[i];
        sum_dy_xhat += out->grad[i] * (*xhat)[i];
      }
      if (gamma->requires_grad) gamma->grad[j] += sum_dy_xhat;
      if (beta->requires_grad) beta->grad[j] += sum_dy;
      if (x->requires_grad) {
        const S gs = gamma->value[j] * (*inv_std)[j] / S(batch);
        for (int b = 0; b < batch; ++b) {
          const size_t i = static_cast<size_t>(b) * f + j;
          x->grad[i] += gs * (S(batch) * out->grad[i] - sum_dy - (*xhat)[i] * sum_dy_xhat);
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout: keep with probability 1 - p_drop and scale kept entries
// by 1/(1 - p_drop). Eval mode and p_drop = 0 are identity (the input tensor
// is returned unchanged).
template <typename S>
Tensor<S> dropout_apply(Graph<S>& g, const Tensor<S>& x, double p_drop, Mode mode,
                        RngStream& rng) {
  detail::require(p_drop >= 0.0 && p_drop < 1.0, "InvalidProbability",
                  "p_drop must lie in [0, 1)");
  if (mode == Mode::kEval || p_drop == 0.0) return x;
  auto keep = std::make_shared<std::vector<uint8_t>>(x->value.size());
  const S scale = S(1.0 / (1.0 - p_drop));
  auto out = g.make(x->shape);
  for (size_t i = 0; i < x->value.size(); ++i) {
    (*keep)[i] = rng.next_unit() >= p_drop ? 1 : 0;
    out->value[i] = (*keep)[i] ? x->value[i] * scale : S(0);
  }
  g.record([x, out, keep, scale]() {
    if (!x->requires_grad) return;
    for (size_t i = 0; i < x->value.size(); ++i)
      if ((*keep)[i]) x->grad[i] += out->grad[i] * scale;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> mse_loss(Graph<S>& g, const Tensor<S>& pred, const std::vector<S>& target) {
  detail::require(pred->numel() == static_cast<int64_t>(target.size()), "ShapeMismatch",
                  "mse_loss requires equal lengths");
  const int n = static_cast<int>(target.size());
  auto out = g.make({1});
  S acc = S(0);
  for (int i = 0; i < n; ++i) {
    const S d = pred->value[i] - target[i];
    acc += d * d;
  }
  out->value[0] = acc / S(n);
  g.record([pred, out, target, n]() {
    if (!pred->requires_grad) return;
    const S go = out->grad[0];
    for (int i = 0; i < n; ++i)
      pred->grad[i] += go * S(2) * (pred->value[i] - target[i]) / S(n);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Sequence helpers
// ---------------------------------------------------------------------------

// x: [B, T, C] -> [B, C] at position t.
template <typename S>
Tensor<S> slice_time(Graph<S>& g, const Tensor<S>& x, int t) {
  const int batch = x->shape[0], t_len = x->shape[1], c = x->shape[2];
  detail::require(t >= 0 && t < t_len, "ShapeMismatch", "slice_time position out of range");
  auto out = g.make({batch, c});
  for (int b = 0; b < batch; ++b)
    std::copy_n(x->value.data() + (static_cast<size_t>(b) * t_len + t) * c, c,
                out->value.data() + static_cast<size_t>(b) * c);
  g.record([x, out, t, batch, t_len, c]() {
    if (!x->requires_grad) return;
    for (int b = 0; b < batch; ++b) {
      S* xg = x->grad.data() + (static_cast<size_t>(b) * t_len + t) * c;
      const S* og = out->grad.data() + static_cast<size_t>(b) * c;
      for (int j = 0; j < c; ++j) xg[j] += og[j];
    }
  });
  return out;
}

// x: [B, C] -> [B, T, C], copying each row T times.
template <typename S>
Tensor<S> repeat_time(Graph<S>& g, const Tensor<S>& x, int t_len) {
  const int batch = x->shape[0], c = x->shape[1];
  auto out = g.make({batch, t_len, c});
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < t_len; ++t)
      std::copy_n(x->value.data() + static_cast<size_t>(b) * c, c,
                  out->value.data() + (static_cast<size_t>(b) * t_len + t) * c);
  g.record([x, out, batch, t_len, c]() {
    if (!x->requires_grad) return;
    for (int b = 0; b < batch; ++b) {
      S* xg = x->grad.data() + static_cast<size_t>(b) * c;
      for (int t = 0; t < t_len; ++t) {
        const S* og = out->grad.data() + (static_cast<size_t>(b) * t_len + t) * c;
        for (int j = 0; j < c; ++j) xg[j] += og[j];
      }
    }
  });
  return out;
}

// Zeroes the feature rows of padded positions; mask is [B * T], 1 = valid.
template <typename S>
Tensor<S> mask_time(Graph<S>& g, const Tensor<S>& x, const std::vector<uint8_t>& mask) {
  const int batch = x->shape[0], t_len = x->shape[1], c = x->shape[2];
  detail::require(static_cast<int>(mask.size()) == batch * t_len, "ShapeMismatch",
                  "mask must have batch * T entries");
  auto out = g.make(x->shape);
  for (int p = 0; p < batch * t_len; ++p)
    if (mask[p])
      std::copy_n(x->value.data() + static_cast<size_t>(p) * c, c,
                  out->value.data() + static_cast<size_t>(p) * c);
  g.record([x, out, mask, batch, t_len, c]() {
    if (!x->requires_grad) return;
    for (int p = 0; p < batch * t_len; ++p) {
      if (!mask[p]) continue;
      S* xg = x->grad.data() + static_cast<size_t>(p) * c;
      const S* og = out->grad.data() + static_cast<size_t>(p) * c;
      for (int j = 0; j < c; ++j) xg[j] += og[j];
    }
  });
  return out;
}

// Attention pooling: out[b, :] = sum_t alpha[b, t] * s[b, t, :].
template <typename S>
Tensor<S> attend_pool(Graph<S>& g, const Tensor<S>& s, const Tensor<S>& alpha) {
  const int batch = s->shape[0], t_len = s->shape[1], d = s->shape[2];
  detail::require(alpha->shape == std::vector<int>{batch, t_len}, "ShapeMismatch",
                  "attention weights must be [B, T]");
  auto out = g.make({batch, d});
  for (int b = 0; b < batch; ++b) {
    S* orow = out->value.data() + static_cast<size_t>(b) * d;
    for (int t = 0; t < t_len; ++t) {
      const S a = alpha->value[static_cast<size_t>(b) * t_len + t];
      if (a == S(0)) continue;
      const S* srow = s->value.data() + (static_cast<size_t>(b) * t_len + t) * d;
      for (int j = 0; j < d; ++j) orow[j] += a * srow[j];
    }
  }
  g.record([s, alpha, out, batch, t_len, d]() {
    for (int b = 0; b < batch; ++b) {
      const S* og = out->grad.data() + static_cast<size_t>(b) * d;
      for (int t = 0; t < t_len; ++t) {
        const size_t ai = static_cast<size_t>(b) * t_len + t;
        const S* srow = s->value.data() + (static_cast<size_t>(b) * t_len + t) * d;
        if (alpha->requires_grad) {
          S acc = S(0);
          for (int j = 0; j < d; ++j) acc += og[j] * srow[j];
          alpha->grad[ai] += acc;
        }
        if (s->requires_grad) {
          const S a = alpha->value[ai];
          if (a != S(0)) {
            S* sg = s->grad.data() + (static_cast<size_t>(b) * t_len + t) * d;
            for (int j = 0; j < d; ++j) sg[j] += a * og[j];
          }
        }
      }
    }
  });
  return out;
}

// Global max pool over valid positions: [B, T, C] -> [B, C].
template <typename S>
Tensor<S> max_pool_time(Graph<S>& g, const Tensor<S>& x, const std::vector<uint8_t>& mask) {
  const int batch = x->shape[0], t_len = x->shape[1], c = x->shape[2];
  detail::require(static_cast<int>(mask.size()) == batch * t_len, "ShapeMismatch",
                  "mask must have batch * T entries");
  auto out = g.make({batch, c});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(batch) * c, -1);
  for (int b = 0; b < batch; ++b) {
    bool any = false;
    for (int t = 0; t < t_len; ++t) {
      if (!mask[static_cast<size_t>(b) * t_len + t]) continue;
      any = true;
      const S* xrow = x->value.data() + (static_cast<size_t>(b) * t_len + t) * c;
      for (int j = 0; j < c; ++j) {
        const size_t oi = static_cast<size_t>(b) * c + j;
        if ((*argmax)[oi] < 0 || xrow[j] > out->value[oi]) {
          out->value[oi] = xrow[j];
          (*argmax)[oi] = t;
        }
      }
    }
    detail::require(any, "AllMasked", "max pool row has no valid position");
  }
  g.record([x, out, argmax, batch, t_len, c]() {
    if (!x->requires_grad) return;
    for (int b = 0; b < batch; ++b)
      for (int j = 0; j < c; ++j) {
        const size_t oi = static_cast<size_t>(b) * c + j;
        const int t = (*argmax)[oi];
        x->grad[(static_cast<size_t>(b) * t_len + t) * c + j] += out->grad[oi];
      }
  });
  return out;
}

// Per-row select: out[r, :] = keep[r] ? a[r, :] : b[r, :]. The GRU uses this
// to carry state through padded positions.
template <typename S>
Tensor<S> lerp_rows(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b,
                    const std::vector<uint8_t>& keep_a) {
  detail::require(a->shape == b->shape, "ShapeMismatch", "lerp_rows requires equal shapes");
  const int rows = a->shape[0], c = a->shape[1];
  detail::require(static_cast<int>(keep_a.size()) == rows, "ShapeMismatch",
                  "keep mask must have one entry per row");
  auto out = g.make(a->shape);
  for (int r = 0; r < rows; ++r) {
    const Tensor<S>& src = keep_a[r] ? a : b;
    std::copy_n(src->value.data() + static_cast<size_t>(r) * c, c,
                out->value.data() + static_cast<size_t>(r) * c);
  }
  g.record([a, b, out, keep_a, rows, c]() {
    for (int r = 0; r < rows; ++r) {
      const Tensor<S>& src = keep_a[r] ? a : b;
      if (!src->requires_grad) continue;
      S* sg = src->grad.data() + static_cast<size_t>(r) * c;
      const S* og = out->grad.data() + static_cast<size_t>(r) * c;
      for (int j = 0; j < c; ++j) sg[j] += og[j];
    }
  });
  return out;
}

}  // namespace pacc::nn
