#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pacc/models/spec.hpp"
#include "pacc/nn/gru.hpp"
#include "pacc/nn/init.hpp"
#include "pacc/nn/ops.hpp"
#include "pacc/rng.hpp"

namespace pacc::models {

using nn::Activation;
using nn::Graph;
using nn::Mode;
using nn::NamedTensor;
using nn::Tensor;

// One training/inference batch. token_ids/pad_mask are [batch * t_len]
// row-major; genes are the transformed expression panel [batch * G];
// fingerprints feed the DNN baseline only.
template <typename S>
struct Batch {
  int batch = 0;
  int t_len = 0;
  std::vector<int> token_ids;
  std::vector<uint8_t> pad_mask;
  std::vector<S> genes;
  std::vector<S> fingerprints;
};

template <typename S>
struct ForwardOutput {
  Tensor<S> prediction;                     // [B], normalized-label scale
  Tensor<S> gene_attention;                 // [B, G]; null for the DNN baseline
  std::vector<Tensor<S>> smiles_attention;  // one [B, T] map per head; empty
                                            // for DNN/bRNN/SCNN
};

// ---------------------------------------------------------------------------
// Attention building blocks (exposed for direct tests)
// ---------------------------------------------------------------------------

// alpha = softmax(W_a g + b_a); filtered = alpha . g (elementwise gating, so
// the context stays a length-|G| vector).
template <typename S>
std::pair<Tensor<S>, Tensor<S>> gene_attention_forward(Graph<S>& g, const Tensor<S>& genes,
                                                       const Tensor<S>& wa,
                                                       const Tensor<S>& ba) {
  auto alpha = softmax_masked<S>(g, nn::linear(g, genes, wa, ba), nullptr);
  auto filtered = nn::mul(g, alpha, genes);
  return {filtered, alpha};
}

// u_i = V^T tanh(W_e s_i + b); alpha = masked softmax; pooled = sum alpha_i s_i.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> self_attention_forward(Graph<S>& g, const Tensor<S>& s,
                                                       const std::vector<uint8_t>& pad_mask,
                                                       const Tensor<S>& we, const Tensor<S>& b,
                                                       const Tensor<S>& v) {
  const int batch = s->shape[0], t_len = s->shape[1];
  auto proj = nn::linear(g, s, we, b);
  auto h = nn::apply_activation(g, proj, Activation::kTanh);
  auto logits = nn::reshape(g, nn::matmul(g, h, v), {batch, t_len});
  auto alpha = nn::softmax_masked(g, logits, &pad_mask);
  auto pooled = nn::attend_pool(g, s, alpha);
  return {pooled, alpha};
}

// u_i = V^T tanh(W_e s_i + W_g G): the gene context vector is added to every
// projected token before the nonlinearity (no bias term).
template <typename S>
std::pair<Tensor<S>, Tensor<S>> contextual_attention_forward(
    Graph<S>& g, const Tensor<S>& s, const Tensor<S>& gene_ctx,
    const std::vector<uint8_t>& pad_mask, const Tensor<S>& we, const Tensor<S>& wg,
    const Tensor<S>& v) {
  const int batch = s->shape[0], t_len = s->shape[1];
  auto proj = nn::matmul(g, s, we);
  auto ctx = nn::repeat_time(g, nn::matmul(g, gene_ctx, wg), t_len);
  auto h = nn::apply_activation(g, nn::add(g, proj, ctx), Activation::kTanh);
  auto logits = nn::reshape(g, nn::matmul(g, h, v), {batch, t_len});
  auto alpha = nn::softmax_masked(g, logits, &pad_mask);
  auto pooled = nn::attend_pool(g, s, alpha);
  return {pooled, alpha};
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

template <typename S>
class Encoder {
 public:
  struct NamedBuffer {
    std::string name;
    std::vector<S>* data;
  };

  Encoder(ModelSpec spec, RngStream& rng) : spec_(std::move(spec)) {
    spec_.validate();
    Graph<S> g;  // leaf creation only; nothing is recorded
    build(g, rng);
  }

  const ModelSpec& spec() const { return spec_; }

  std::vector<NamedTensor<S>>& parameters() { return params_; }
  const std::vector<NamedTensor<S>>& parameters() const { return params_; }

  std::vector<Tensor<S>> parameter_tensors() const {
    std::vector<Tensor<S>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.tensor);
    return out;
  }

  std::vector<NamedBuffer> buffers() {
    std::vector<NamedBuffer> out;
    for (size_t i = 0; i < head_bns_.size(); ++i) {
      out.push_back({"head." + std::to_string(i) + ".bn.running_mean",
                     &head_bns_[i].running_mean});
      out.push_back({"head." + std::to_string(i) + ".bn.running_var",
                     &head_bns_[i].running_var});
    }
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
  }

  // dropout_rng may be null in eval mode (no randomness is consumed).
  ForwardOutput<S> forward(Graph<S>& g, const Batch<S>& batch, Mode mode,
                           RngStream* dropout_rng = nullptr) {
    if (spec_.kind != ModelKind::kDnn) {
      if (static_cast<int>(batch.token_ids.size()) != batch.batch * batch.t_len ||
          batch.pad_mask.size() != batch.token_ids.size())
        throw Error("ShapeMismatch", "batch token ids / pad mask are inconsistent");
    }
    if (static_cast<int>(batch.genes.size()) != batch.batch * spec_.panel_size)
      throw Error("ShapeMismatch", "gene panel width disagrees with the model spec");
    if (mode == Mode::kTrain && spec_.p_drop > 0.0 && dropout_rng == nullptr)
      throw Error("MissingRng", "train-mode forward with dropout needs an RNG stream");

    auto genes = g.leaf({batch.batch, spec_.panel_size}, batch.genes, false);

    switch (spec_.kind) {
      case ModelKind::kDnn: return forward_dnn(g, batch, genes, mode, dropout_rng);
      case ModelKind::kBrnn: return forward_brnn(g, batch, genes, mode, dropout_rng);
      case ModelKind::kScnn: return forward_scnn(g, batch, genes, mode, dropout_rng);
      case ModelKind::kSa: return forward_sa(g, batch, genes, mode, dropout_rng);
      case ModelKind::kCa: return forward_ca(g, batch, genes, mode, dropout_rng);
      case ModelKind::kMca: return forward_mca(g, batch, genes, mode, dropout_rng);
    }
    throw Error("UnknownModelKind", "unreachable");
  }

 private:
  // -- construction --------------------------------------------------------

  Tensor<S> param(const std::string& name, Tensor<S> t) {
    params_.push_back({name, t});
    return t;
  }

  void build(Graph<S>& g, RngStream& rng) {
    using nn::init_conv;
    using nn::init_dense;
    using nn::init_embedding;
    using nn::init_orthogonal;
    using nn::init_zeros;
    const int gdim = spec_.panel_size;

    if (spec_.kind != ModelKind::kDnn)
      embed_ = param("embed.E", init_embedding<S>(g, spec_.vocab_size, spec_.embedding_dim, rng));

    const int n_gene_attn = spec_.kind == ModelKind::kDnn ? 0
                            : spec_.kind == ModelKind::kMca
                                ? static_cast<int>(spec_.kernel_widths.size()) + 1
                                : 1;
    for (int i = 0; i < n_gene_attn; ++i) {
      gene_wa_.push_back(param("gene_attn." + std::to_string(i) + ".w",
                               init_dense<S>(g, gdim, gdim, rng)));
      gene_ba_.push_back(param("gene_attn." + std::to_string(i) + ".b",
                               init_zeros<S>(g, {gdim})));
    }

    switch (spec_.kind) {
      case ModelKind::kDnn:
        break;
      case ModelKind::kBrnn: {
        auto make_cell = [&](const std::string& prefix, int input) {
          nn::GruCell<S> c;
          c.wz = param(prefix + ".wz", init_dense<S>(g, input, spec_.gru_hidden, rng));
          c.uz = param(prefix + ".uz", init_orthogonal<S>(g, spec_.gru_hidden, rng));
          c.bz = param(prefix + ".bz", init_zeros<S>(g, {spec_.gru_hidden}));
          c.wr = param(prefix + ".wr", init_dense<S>(g, input, spec_.gru_hidden, rng));
          c.ur = param(prefix + ".ur", init_orthogonal<S>(g, spec_.gru_hidden, rng));
          c.br = param(prefix + ".br", init_zeros<S>(g, {spec_.gru_hidden}));
          c.wh = param(prefix + ".wh", init_dense<S>(g, input, spec_.gru_hidden, rng));
          c.uh = param(prefix + ".uh", init_orthogonal<S>(g, spec_.gru_hidden, rng));
          c.bh = param(prefix + ".bh", init_zeros<S>(g, {spec_.gru_hidden}));
          c.input = input;
          c.hidden = spec_.gru_hidden;
          return c;
        };
        gru_.fwd1 = make_cell("gru.fwd1", spec_.embedding_dim);
        gru_.bwd1 = make_cell("gru.bwd1", spec_.embedding_dim);
        gru_.fwd2 = make_cell("gru.fwd2", 2 * spec_.gru_hidden);
        gru_.bwd2 = make_cell("gru.bwd2", 2 * spec_.gru_hidden);
        gru_.hidden = spec_.gru_hidden;
        break;
      }
      case ModelKind::kScnn: {
        int c_in = spec_.embedding_dim;
        for (size_t l = 0; l < spec_.scnn_channels.size(); ++l) {
          const int c_out = spec_.scnn_channels[l];
          conv_k_.push_back(param("conv." + std::to_string(l) + ".k",
                                  init_conv<S>(g, spec_.scnn_widths[l], c_in, c_out, rng)));
          conv_b_.push_back(param("conv." + std::to_string(l) + ".b", init_zeros<S>(g, {c_out})));
          c_in = c_out;
        }
        break;
      }
      case ModelKind::kSa: {
        attn_we_.push_back(param("attn.0.we",
                                 init_dense<S>(g, spec_.embedding_dim, spec_.attention_dim, rng)));
        attn_b_.push_back(param("attn.0.b", init_zeros<S>(g, {spec_.attention_dim})));
        attn_v_.push_back(param("attn.0.v", init_dense<S>(g, spec_.attention_dim, 1, rng)));
        break;
      }
      case ModelKind::kCa: {
        attn_we_.push_back(param("attn.0.we",
                                 init_dense<S>(g, spec_.embedding_dim, spec_.attention_dim, rng)));
        attn_wg_.push_back(param("attn.0.wg", init_dense<S>(g, gdim, spec_.attention_dim, rng)));
        attn_v_.push_back(param("attn.0.v", init_dense<S>(g, spec_.attention_dim, 1, rng)));
        break;
      }
      case ModelKind::kMca: {
        const int channels = static_cast<int>(spec_.kernel_widths.size());
        for (int c = 0; c < channels; ++c) {
          conv_k_.push_back(param("conv." + std::to_string(c) + ".k",
                                  init_conv<S>(g, spec_.kernel_widths[c], spec_.embedding_dim,
                                               spec_.kernels_per_channel, rng)));
          conv_b_.push_back(param("conv." + std::to_string(c) + ".b",
                                  init_zeros<S>(g, {spec_.kernels_per_channel})));
        }
        // m independent heads per channel; the residual channel attends the
        // raw embeddings.
        for (int c = 0; c <= channels; ++c) {
          const int d = c < channels ? spec_.kernels_per_channel : spec_.embedding_dim;
          for (int h = 0; h < spec_.heads_per_channel; ++h) {
            const std::string prefix = "attn." + std::to_string(c) + "." + std::to_string(h);
            attn_we_.push_back(param(prefix + ".we", init_dense<S>(g, d, spec_.attention_dim, rng)));
            attn_wg_.push_back(param(prefix + ".wg", init_dense<S>(g, gdim, spec_.attention_dim, rng)));
            attn_v_.push_back(param(prefix + ".v", init_dense<S>(g, spec_.attention_dim, 1, rng)));
          }
        }
        break;
      }
    }

    // Dense head: linear -> batch norm -> sigmoid -> dropout per layer, then
    // a single linear output neuron. The per-layer bias is omitted: batch
    // norm's beta is the shift, and a bias ahead of the mean subtraction
    // cancels exactly.
    int width = spec_.head_input_width();
    for (size_t l = 0; l < spec_.dense_sizes.size(); ++l) {
      const int next = spec_.dense_sizes[l];
      head_w_.push_back(param("head." + std::to_string(l) + ".w",
                              init_dense<S>(g, width, next, rng)));
      head_bns_.push_back(nn::make_batchnorm<S>(g, next));
      params_.push_back({"head." + std::to_string(l) + ".bn.gamma", head_bns_.back().gamma});
      params_.push_back({"head." + std::to_string(l) + ".bn.beta", head_bns_.back().beta});
      width = next;
    }
    out_w_ = param("out.w", init_dense<S>(g, width, 1, rng));
    out_b_ = param("out.b", init_zeros<S>(g, {1}));
  }

  // -- shared pieces -------------------------------------------------------

  Tensor<S> dense_head(Graph<S>& g, Tensor<S> x, Mode mode, RngStream* rng) {
    for (size_t l = 0; l < head_w_.size(); ++l) {
      x = nn::matmul(g, x, head_w_[l]);
      x = nn::batchnorm_forward(g, x, head_bns_[l], mode);
      x = nn::apply_activation(g, x, Activation::kSigmoid);
      if (mode == Mode::kTrain && spec_.p_drop > 0.0)
        x = nn::dropout_apply(g, x, spec_.p_drop, mode, *rng);
    }
    auto out = nn::linear(g, x, out_w_, out_b_);
    return nn::reshape(g, out, {x->shape[0]});
  }

  Tensor<S> embed_tokens(Graph<S>& g, const Batch<S>& batch) {
    if (batch.t_len > spec_.max_len)
      throw Error("ShapeMismatch", "sequence length " + std::to_string(batch.t_len) +
                                       " exceeds model max_len " + std::to_string(spec_.max_len));
    return nn::embedding_forward(g, batch.token_ids, batch.batch, batch.t_len, embed_);
  }

  // -- per-architecture forwards -------------------------------------------

  ForwardOutput<S> forward_dnn(Graph<S>& g, const Batch<S>& batch, const Tensor<S>& genes,
                               Mode mode, RngStream* rng) {
    if (static_cast<int>(batch.fingerprints.size()) != batch.batch * spec_.fingerprint_width)
      throw Error("ShapeMismatch", "fingerprint width disagrees with the model spec");
    auto fp = g.leaf({batch.batch, spec_.fingerprint_width}, batch.fingerprints, false);
    auto joint = nn::concat_cols<S>(g, {fp, genes});
    ForwardOutput<S> out;
    out.prediction = dense_head(g, joint, mode, rng);
    return out;
  }

  ForwardOutput<S> forward_brnn(Graph<S>& g, const Batch<S>& batch, const Tensor<S>& genes,
                                Mode mode, RngStream* rng) {
    auto emb = embed_tokens(g, batch);
    auto states = nn::bigru_forward(g, emb, gru_, batch.pad_mask);
    auto [filtered, galpha] = gene_attention_forward(g, genes, gene_wa_[0], gene_ba_[0]);
    auto joint = nn::concat_cols<S>(g, {states, filtered});
    ForwardOutput<S> out;
    out.prediction = dense_head(g, joint, mode, rng);
    out.gene_attention = galpha;
    return out;
  }

  ForwardOutput<S> forward_scnn(Graph<S>& g, const Batch<S>& batch, const Tensor<S>& genes,
                                Mode mode, RngStream* rng) {
    auto emb = nn::mask_time(g, embed_tokens(g, batch), batch.pad_mask);
    Tensor<S> x = emb;
    // Layer 1 collapses the embedding axis; later layers are plain 1-D
    // convolutions. All use sigmoid activations.
    for (size_t l = 0; l < conv_k_.size(); ++l)
      x = nn::conv1d_forward(g, x, conv_k_[l], conv_b_[l], Activation::kSigmoid);
    auto pooled = nn::max_pool_time(g, x, batch.pad_mask);
    auto [filtered, galpha] = gene_attention_forward(g, genes, gene_wa_[0], gene_ba_[0]);
    auto joint = nn::concat_cols<S>(g, {pooled, filtered});
    ForwardOutput<S> out;
    out.prediction = dense_head(g, joint, mode, rng);
    out.gene_attention = galpha;
    return out;
  }

  ForwardOutput<S> forward_sa(Graph<S>& g, const Batch<S>& batch, const Tensor<S>& genes,
                              Mode mode, RngStream* rng) {
    auto emb = embed_tokens(g, batch);
    auto [pooled, alpha] =
        self_attention_forward(g, emb, batch.pad_mask, attn_we_[0], attn_b_[0], attn_v_[0]);
    auto [filtered, galpha] = gene_attention_forward(g, genes, gene_wa_[0], gene_ba_[0]);
    auto joint = nn::concat_cols<S>(g, {pooled, filtered});
    ForwardOutput<S> out;
    out.prediction = dense_head(g, joint, mode, rng);
    out.gene_attention = galpha;
    out.smiles_attention.push_back(alpha);
    return out;
  }

  ForwardOutput<S> forward_ca(Graph<S>& g, const Batch<S>& batch, const Tensor<S>& genes,
                              Mode mode, RngStream* rng) {
    auto emb = embed_tokens(g, batch);
    auto [filtered, galpha] = gene_attention_forward(g, genes, gene_wa_[0], gene_ba_[0]);
    auto [pooled, alpha] = contextual_attention_forward(g, emb, filtered, batch.pad_mask,
                                                        attn_we_[0], attn_wg_[0], attn_v_[0]);
    auto joint = nn::concat_cols<S>(g, {pooled, filtered});
    ForwardOutput<S> out;
    out.prediction = dense_head(g, joint, mode, rng);
    out.gene_attention = galpha;
    out.smiles_attention.push_back(alpha);
    return out;
  }

  ForwardOutput<S> forward_mca(Graph<S>& g, const Batch<S>& batch, const Tensor<S>& genes,
                               Mode mode, RngStream* rng) {
    const int channels = static_cast<int>(spec_.kernel_widths.size());
    const int m = spec_.heads_per_channel;
    // Pad embeddings are zeroed so convolution windows see the same values
    // regardless of how much trailing padding a batch carries.
    auto emb = nn::mask_time(g, embed_tokens(g, batch), batch.pad_mask);

    std::vector<Tensor<S>> pooled;
    std::vector<Tensor<S>> head_alphas;
    std::vector<Tensor<S>> gene_alphas;
    for (int c = 0; c <= channels; ++c) {
      Tensor<S> feats = c < channels
                            ? nn::conv1d_forward(g, emb, conv_k_[c], conv_b_[c], Activation::kRelu)
                            : emb;
      auto [filtered, galpha] = gene_attention_forward(g, genes, gene_wa_[c], gene_ba_[c]);
      gene_alphas.push_back(galpha);
      for (int h = 0; h < m; ++h) {
        const size_t idx = static_cast<size_t>(c) * m + h;
        auto [p, alpha] = contextual_attention_forward(g, feats, filtered, batch.pad_mask,
                                                       attn_we_[idx], attn_wg_[idx],
                                                       attn_v_[idx]);
        pooled.push_back(p);
        head_alphas.push_back(alpha);
      }
    }
    auto joint = nn::concat_cols(g, pooled);

    ForwardOutput<S> out;
    out.prediction = dense_head(g, joint, mode, rng);
    out.smiles_attention = std::move(head_alphas);
    // Reported gene attention is the mean over the per-channel layers.
    Tensor<S> acc = gene_alphas[0];
    for (size_t c = 1; c < gene_alphas.size(); ++c) acc = nn::add(g, acc, gene_alphas[c]);
    out.gene_attention = nn::scale_add(g, acc, S(1) / S(gene_alphas.size()), S(0));
    return out;
  }

  ModelSpec spec_;
  std::vector<NamedTensor<S>> params_;

  Tensor<S> embed_;
  std::vector<Tensor<S>> gene_wa_, gene_ba_;
  std::vector<Tensor<S>> conv_k_, conv_b_;
  std::vector<Tensor<S>> attn_we_, attn_wg_, attn_b_, attn_v_;
  nn::BiGruParams<S> gru_;
  std::vector<Tensor<S>> head_w_;
  std::vector<nn::BatchNorm<S>> head_bns_;
  Tensor<S> out_w_, out_b_;
};

}  // namespace pacc::models
