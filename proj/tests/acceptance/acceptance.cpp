// Acceptance suite: every criterion prints one [PASS]/[FAIL] line; the
// process exits non-zero when any line fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "../data_fixtures.hpp"
#include "../fuzz_mols.hpp"
#include "../model_fixtures.hpp"
#include "pacc/analysis/attention.hpp"
#include "pacc/analysis/ora.hpp"
#include "pacc/chem/fingerprint.hpp"
#include "pacc/chem/mol.hpp"
#include "pacc/chem/token.hpp"
#include "pacc/cli/cli.hpp"
#include "pacc/data/split.hpp"
#include "pacc/netprop/netprop.hpp"
#include "pacc/nn/gradcheck.hpp"
#include "pacc/nn/gru.hpp"
#include "pacc/serve/server.hpp"
#include "pacc/train/predict.hpp"
#include "pacc/train/trainer.hpp"

using namespace pacc;
using namespace pacc::testutil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Propagation oracle
// --------------------------------------------------------------------------

Outcome propagation_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(42);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + static_cast<int>(rng.next_below(181));
    std::vector<netprop::Edge> edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng.next_unit() < 0.05)
          edges.push_back({"g" + std::to_string(a), "g" + std::to_string(b),
                           0.1 + rng.next_unit()});
    if (edges.empty()) edges.push_back({"g0", "g1", 1.0});
    auto net = netprop::build_network(edges);
    std::set<std::string> targets;
    for (int t = 0; t < 2; ++t)
      targets.insert(net.genes[rng.next_below(net.genes.size())]);
    auto w0 = netprop::initial_weights(net, targets);
    auto res = netprop::propagate(net, w0, 0.7, 1e-6);
    if (!res.converged) return {false, "propagation failed to converge"};
    auto exact = netprop::solve_fixed_point(net, w0, 0.7);
    for (size_t i = 0; i < w0.size(); ++i)
      worst = std::max(worst, std::abs(res.weights[i] - exact[i]));
  }

  // alpha = 0 returns W0 exactly.
  auto net = netprop::build_network({{"a", "b", 1.0}, {"b", "c", 0.5}});
  auto w0 = netprop::initial_weights(net, {"a"});
  auto zero = netprop::propagate(net, w0, 0.0, 1e-6);
  const bool alpha0_exact = zero.weights == w0 && zero.converged;

  const double secs = seconds_since(t0);
  const bool pass = worst < 1e-8 && alpha0_exact && secs < 5.0;
  return {pass, "20 graphs <=200 nodes, max |propagate - solve| = " + fmt(worst) +
                    " (limit 1e-08), alpha=0 exact: " + (alpha0_exact ? "yes" : "no") +
                    ", " + fmt(secs) + " s (limit 5)"};
}

// --------------------------------------------------------------------------
// 2. Chem round trips
// --------------------------------------------------------------------------

Outcome chem_round_trips() {
  auto corpus = fuzz_corpus(500, 900913);
  int token_ok = 0, canon_ok = 0, total_variants = 0;
  for (const auto& mol : corpus) {
    const std::string canon = chem::canonical_form(mol);
    {
      chem::TokenSequence t = chem::tokenize(mol.source);
      if (chem::detokenize(t) == mol.source) ++token_ok;
    }
    bool all_same = true;
    for (const std::string& s : chem::enumerate_smiles(mol, 32, 7)) {
      ++total_variants;
      chem::TokenSequence t = chem::tokenize(s);
      if (chem::detokenize(t) != s) all_same = false;
      if (chem::canonical_form(chem::parse_smiles(s)) != canon) all_same = false;
    }
    if (all_same) ++canon_ok;
  }

  RngStream rng(606);
  int tanimoto_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    chem::Fingerprint a(512, 2), b(512, 2);
    std::set<int> sa, sb;
    const int na = static_cast<int>(rng.next_below(80));
    const int nb = static_cast<int>(rng.next_below(80));
    for (int k = 0; k < na; ++k) {
      int bit = static_cast<int>(rng.next_below(512));
      a.set(bit);
      sa.insert(bit);
    }
    for (int k = 0; k < nb; ++k) {
      int bit = static_cast<int>(rng.next_below(512));
      b.set(bit);
      sb.insert(bit);
    }
    std::set<int> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(),
                   std::inserter(uni, uni.begin()));
    const double expected =
        uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    if (chem::tanimoto(a, b) == expected) ++tanimoto_ok;
  }

  const bool pass = token_ok == 500 && canon_ok == 500 && tanimoto_ok == 1000;
  return {pass, "tokenize/detokenize " + std::to_string(token_ok) +
                    "/500, enumerate(n=32) canonical-stable " + std::to_string(canon_ok) +
                    "/500 (" + std::to_string(total_variants) + " variants), tanimoto exact " +
                    std::to_string(tanimoto_ok) + "/1000"};
}

// --------------------------------------------------------------------------
// 3. Gradient suite
// --------------------------------------------------------------------------

Outcome gradient_suite() {
  using namespace pacc::nn;
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(515);
  auto rand_vec = [&rng](size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
  };

  double primitive_worst = 0.0;
  std::string worst_name = "-";
  auto track = [&](const std::string& name, double err) {
    if (err > primitive_worst) {
      primitive_worst = err;
      worst_name = name;
    }
  };

  {  // dense layers, each activation
    for (Activation act : {Activation::kLinear, Activation::kSigmoid, Activation::kRelu,
                           Activation::kTanh}) {
      Graph<double> setup;
      // Keep values away from the ReLU kink so central differences are valid.
      auto x = setup.leaf({4, 3}, rand_vec(12, 0.2, 1.0), true);
      auto w = setup.leaf({3, 2}, rand_vec(6, 0.2, 0.9), true);
      auto b = setup.leaf({2}, rand_vec(2, 0.1, 0.3), true);
      auto target = rand_vec(8);
      auto build = [&](Graph<double>& g) {
        auto y = dense_forward(g, x, w, b, act);
        return mse_loss(g, reshape(g, y, {8}), target);
      };
      track("dense", grad_check(build, {{"x", x}, {"w", w}, {"b", b}}).worst);
    }
  }
  {  // embedding
    Graph<double> setup;
    auto table = setup.leaf({6, 3}, rand_vec(18), true);
    std::vector<int> ids = {1, 4, 4, 0, 2, 5};
    auto target = rand_vec(18);
    auto build = [&](Graph<double>& g) {
      auto e = embedding_forward(g, ids, 2, 3, table);
      return mse_loss(g, reshape(g, e, {18}), target);
    };
    track("embedding", grad_check(build, {{"E", table}}).worst);
  }
  {  // conv1d
    Graph<double> setup;
    auto x = setup.leaf({2, 5, 3}, rand_vec(30), true);
    auto k = setup.leaf({3, 3, 2}, rand_vec(18), true);
    auto b = setup.leaf({2}, rand_vec(2), true);
    auto target = rand_vec(20);
    auto build = [&](Graph<double>& g) {
      auto y = conv1d_forward(g, x, k, b, Activation::kTanh);
      return mse_loss(g, reshape(g, y, {20}), target);
    };
    track("conv1d", grad_check(build, {{"x", x}, {"k", k}, {"b", b}}).worst);
  }
  {  // softmax (masked) + attention pooling + mask_time
    Graph<double> setup;
    auto s = setup.leaf({2, 3, 2}, rand_vec(12), true);
    auto logits = setup.leaf({2, 3}, rand_vec(6), true);
    std::vector<uint8_t> mask = {1, 1, 1, 1, 1, 0};
    auto target = rand_vec(4);
    auto build = [&](Graph<double>& g) {
      auto alpha = softmax_masked(g, logits, &mask);
      auto pooled = attend_pool(g, mask_time(g, s, mask), alpha);
      return mse_loss(g, reshape(g, pooled, {4}), target);
    };
    track("softmax+pool", grad_check(build, {{"s", s}, {"logits", logits}}).worst);
  }
  {  // batch norm (train mode)
    Graph<double> setup;
    auto x = setup.leaf({6, 2}, rand_vec(12, -2, 2), true);
    auto bn = make_batchnorm<double>(setup, 2);
    bn.gamma->value = {1.2, 0.7};
    bn.beta->value = {0.2, -0.1};
    auto target = rand_vec(12);
    auto build = [&](Graph<double>& g) {
      bn.running_mean.assign(2, 0.0);
      bn.running_var.assign(2, 1.0);
      auto y = batchnorm_forward(g, x, bn, Mode::kTrain);
      return mse_loss(g, reshape(g, y, {12}), target);
    };
    track("batchnorm",
          grad_check(build, {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}).worst);
  }
  {  // mse
    Graph<double> setup;
    auto pred = setup.leaf({5}, rand_vec(5), true);
    auto target = rand_vec(5);
    auto build = [&](Graph<double>& g) { return mse_loss(g, pred, target); };
    track("mse", grad_check(build, {{"pred", pred}}).worst);
  }
  {  // max pool + concat + repeat + slice
    Graph<double> setup;
    auto x = setup.leaf({2, 4, 3}, rand_vec(24, 0.1, 2.0), true);
    std::vector<uint8_t> mask = {1, 1, 1, 0, 1, 1, 1, 1};
    auto target = rand_vec(2 * 9);
    auto build = [&](Graph<double>& g) {
      auto pooled = max_pool_time(g, x, mask);        // [2,3]
      auto first = slice_time(g, x, 0);               // [2,3]
      auto rep = repeat_time(g, pooled, 1);           // [2,1,3]
      auto flat_rep = reshape(g, rep, {2, 3});
      auto cat = concat_cols<double>(g, {pooled, first, flat_rep});  // [2,9]
      return mse_loss(g, reshape(g, cat, {18}), target);
    };
    track("pool/concat", grad_check(build, {{"x", x}}).worst);
  }
  {  // bidirectional GRU
    Graph<double> setup;
    const int hidden = 2, in = 2, t_len = 3;
    std::vector<NamedTensor<double>> named;
    auto make_cell = [&](const std::string& prefix, int input) {
      GruCell<double> c;
      c.wz = setup.leaf({input, hidden}, rand_vec(input * hidden, -0.5, 0.5), true);
      c.uz = setup.leaf({hidden, hidden}, rand_vec(hidden * hidden, -0.5, 0.5), true);
      c.bz = setup.leaf({hidden}, rand_vec(hidden, -0.1, 0.1), true);
      c.wr = setup.leaf({input, hidden}, rand_vec(input * hidden, -0.5, 0.5), true);
      c.ur = setup.leaf({hidden, hidden}, rand_vec(hidden * hidden, -0.5, 0.5), true);
      c.br = setup.leaf({hidden}, rand_vec(hidden, -0.1, 0.1), true);
      c.wh = setup.leaf({input, hidden}, rand_vec(input * hidden, -0.5, 0.5), true);
      c.uh = setup.leaf({hidden, hidden}, rand_vec(hidden * hidden, -0.5, 0.5), true);
      c.bh = setup.leaf({hidden}, rand_vec(hidden, -0.1, 0.1), true);
      c.input = input;
      c.hidden = hidden;
      named.push_back({prefix + ".wz", c.wz});
      named.push_back({prefix + ".uh", c.uh});
      named.push_back({prefix + ".br", c.br});
      return c;
    };
    BiGruParams<double> params;
    params.fwd1 = make_cell("fwd1", in);
    params.bwd1 = make_cell("bwd1", in);
    params.fwd2 = make_cell("fwd2", 2 * hidden);
    params.bwd2 = make_cell("bwd2", 2 * hidden);
    params.hidden = hidden;
    auto x = setup.leaf({2, t_len, in}, rand_vec(2 * t_len * in), true);
    std::vector<uint8_t> mask = {1, 1, 1, 1, 1, 0};
    auto target = rand_vec(2 * 2 * hidden);
    named.push_back({"x", x});
    auto build = [&](Graph<double>& g) {
      auto out = bigru_forward(g, x, params, mask);
      return mse_loss(g, reshape(g, out, {2 * 2 * hidden}), target);
    };
    track("bigru", grad_check(build, named).worst);
  }
  {  // attention layer ops
    Graph<double> setup;
    const int d = 3, a_dim = 4, gdim = 3, t_len = 3;
    auto we = setup.leaf({d, a_dim}, rand_vec(d * a_dim), true);
    auto wg = setup.leaf({gdim, a_dim}, rand_vec(gdim * a_dim), true);
    auto v = setup.leaf({a_dim, 1}, rand_vec(a_dim), true);
    auto b = setup.leaf({a_dim}, rand_vec(a_dim, -0.2, 0.2), true);
    auto wa = setup.leaf({gdim, gdim}, rand_vec(gdim * gdim), true);
    auto ba = setup.leaf({gdim}, rand_vec(gdim, -0.2, 0.2), true);
    auto s = setup.leaf({2, t_len, d}, rand_vec(2 * t_len * d), true);
    auto genes = setup.leaf({2, gdim}, rand_vec(2 * gdim), false);
    std::vector<uint8_t> mask = {1, 1, 0, 1, 1, 1};
    auto target = rand_vec(2 * (2 * d + gdim));
    auto build = [&](Graph<double>& g) {
      auto [filtered, galpha] = models::gene_attention_forward(g, genes, wa, ba);
      auto [p_sa, a_sa] = models::self_attention_forward(g, s, mask, we, b, v);
      auto [p_ca, a_ca] = models::contextual_attention_forward(g, s, filtered, mask, we, wg, v);
      auto cat = nn::concat_cols<double>(g, {p_sa, p_ca, filtered});
      return mse_loss(g, reshape(g, cat, {2 * (2 * d + gdim)}), target);
    };
    track("attention-layers",
          grad_check(build, {{"we", we}, {"wg", wg}, {"v", v}, {"b", b}, {"wa", wa}, {"ba", ba},
                             {"s", s}})
              .worst);
  }

  // Full encoders at toy dims.
  double composite_worst = 0.0;
  std::string composite_name = "-";
  RngStream mrng(109);
  for (models::ModelKind kind : all_kinds()) {
    models::ModelSpec spec = toy_spec(kind);
    RngStream init = mrng.fork(900 + static_cast<int>(kind));
    models::Encoder<double> model(spec, init);
    RngStream brng = mrng.fork(800 + static_cast<int>(kind));
    auto batch = toy_batch<double>(spec, 6, 4, brng);
    auto targets = toy_targets<double>(6, brng);
    auto build = [&](Graph<double>& g) {
      auto out = model.forward(g, batch, Mode::kTrain);
      return mse_loss(g, out.prediction, targets);
    };
    const double err = grad_check(build, model.parameters()).worst;
    if (err > composite_worst) {
      composite_worst = err;
      composite_name = models::kind_name(kind);
    }
  }

  const double secs = seconds_since(t0);
  const bool pass = primitive_worst < 1e-4 && composite_worst < 1e-3 && secs < 60.0;
  return {pass, "primitives worst " + fmt(primitive_worst) + " (" + worst_name +
                    ", limit 1e-04); encoders worst " + fmt(composite_worst) + " (" +
                    composite_name + ", limit 1e-03); " + fmt(secs) + " s (limit 60)"};
}

// --------------------------------------------------------------------------
// 4. Attention invariants
// --------------------------------------------------------------------------

Outcome attention_invariants() {
  RngStream rng(91);
  bool sums_ok = true, pads_ok = true;
  for (models::ModelKind kind :
       {models::ModelKind::kSa, models::ModelKind::kCa, models::ModelKind::kMca}) {
    models::ModelSpec spec = toy_spec(kind);
    RngStream init = rng.fork(static_cast<int>(kind));
    models::Encoder<float> model(spec, init);
    RngStream brng = rng.fork(100 + static_cast<int>(kind));
    auto batch = toy_batch<float>(spec, 4, 7, brng);
    nn::Graph<float> g;
    auto out = model.forward(g, batch, nn::Mode::kEval);

    auto check_rows = [&](const nn::Tensor<float>& t, const std::vector<uint8_t>* mask) {
      const int n = t->shape.back();
      const int rows = static_cast<int>(t->numel() / n);
      for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          const float v = t->value[static_cast<size_t>(r) * n + j];
          if (mask && !(*mask)[static_cast<size_t>(r) * n + j] && v != 0.0f) pads_ok = false;
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-5) sums_ok = false;
      }
    };
    check_rows(out.gene_attention, nullptr);
    for (const auto& head : out.smiles_attention) check_rows(head, &batch.pad_mask);
  }

  // MCA pad invariance within 1e-6.
  models::ModelSpec spec = toy_spec(models::ModelKind::kMca);
  RngStream init(97);
  models::Encoder<float> model(spec, init);
  RngStream brng(99);
  auto base = toy_batch<float>(spec, 3, 5, brng, 3);
  nn::Graph<float> g1;
  auto p1 = model.forward(g1, base, nn::Mode::kEval).prediction->value;
  models::Batch<float> padded = base;
  padded.t_len = 8;
  padded.token_ids.assign(3 * 8, 0);
  padded.pad_mask.assign(3 * 8, 0);
  for (int r = 0; r < 3; ++r)
    for (int t = 0; t < 5; ++t) {
      padded.token_ids[r * 8 + t] = base.token_ids[r * 5 + t];
      padded.pad_mask[r * 8 + t] = base.pad_mask[r * 5 + t];
    }
  nn::Graph<float> g2;
  auto p2 = model.forward(g2, padded, nn::Mode::kEval).prediction->value;
  double pad_dev = 0.0;
  for (size_t i = 0; i < p1.size(); ++i)
    pad_dev = std::max(pad_dev, static_cast<double>(std::abs(p1[i] - p2[i])));

  // Concat width formula at published defaults: 3*4*64 + 4*16 = 832, checked on
  // a live model's head weight shape.
  models::ModelSpec full = models::ModelSpec::defaults_for(models::ModelKind::kMca);
  full.vocab_size = 40;
  full.panel_size = 32;
  full.max_len = 64;
  bool width_ok = full.head_input_width() == 832;
  {
    RngStream prng(1);
    models::Encoder<float> big(full, prng);
    for (const auto& p : big.parameters())
      if (p.name == "head.0.w" && p.tensor->shape[0] != 832) width_ok = false;
  }

  const bool pass = sums_ok && pads_ok && pad_dev < 1e-6 && width_ok;
  return {pass, std::string("distributions sum to 1: ") + (sums_ok ? "yes" : "no") +
                    ", exact zeros at pads: " + (pads_ok ? "yes" : "no") +
                    ", MCA pad deviation " + fmt(pad_dev) + " (limit 1e-06), concat width 832: " +
                    (width_ok ? "yes" : "no")};
}

// --------------------------------------------------------------------------
// 5. Overfit target
// --------------------------------------------------------------------------

data::Dataset overfit_dataset() {
  data::SmilesTable smiles;
  const char* mols[] = {"CCO",        "c1ccccc1C", "CC(C)O",   "C1CCOC1",
                        "CC(=O)NC",   "FC(F)CBr",  "c1ccncc1", "CC(C)(C)CO"};
  for (int d = 0; d < 8; ++d) smiles.rows.push_back({"d" + std::to_string(d), mols[d]});
  std::vector<std::string> lines{"cell_id"};
  for (int g = 0; g < 8; ++g) lines[0] += "\tg" + std::to_string(g);
  RngStream rng(7);
  for (int c = 0; c < 8; ++c) {
    std::string row = "c" + std::to_string(c);
    for (int g = 0; g < 8; ++g) row += "\t" + std::to_string(rng.uniform(-2, 2));
    lines.push_back(row);
  }
  auto expr = data::parse_expression_tsv(lines);
  std::vector<data::ResponseRow> resp;
  for (int d = 0; d < 8; ++d)
    for (int c = 0; c < 8; ++c)
      resp.push_back({"d" + std::to_string(d), "c" + std::to_string(c), rng.uniform(-3, 3)});
  return data::Dataset::build(smiles, expr, resp,
                              {"g0", "g1", "g2", "g3", "g4", "g5", "g6", "g7"}, 1, 0);
}

Outcome overfit_target() {
  const auto t0 = std::chrono::steady_clock::now();
  auto ds = overfit_dataset();

  models::ModelSpec spec;
  spec.kind = models::ModelKind::kMca;
  spec.embedding_dim = 8;
  spec.kernels_per_channel = 8;
  spec.heads_per_channel = 2;
  spec.attention_dim = 8;
  spec.kernel_widths = {3, 5, 11};
  spec.dense_sizes = {32, 16};
  spec.p_drop = 0.0;
  spec = train::bind_spec(spec, ds);

  auto [label_tf, expr_tf] = train::fit_fold_transforms(ds, ds.pairs());
  train::TrainConfig cfg;
  cfg.max_steps = 5000;
  cfg.batch_size = 64;
  cfg.eval_interval = 250;
  cfg.checkpoint_keep = 1;
  cfg.seed = 1;
  cfg.augment = false;
  cfg.schedule = {1e-3, 0.5, 1500};

  auto run = [&]() {
    return train::train(spec, ds, ds.pairs(), ds.pairs(), label_tf, expr_tf, cfg);
  };
  auto res = run();
  double best = 1e18;
  int64_t best_step = -1;
  for (const auto& h : res.history)
    if (h.val_rmse < best) {
      best = h.val_rmse;
      best_step = h.step;
    }

  // Determinism per seed: a rerun reproduces the history bit-identically.
  auto res2 = run();
  bool deterministic = res.history.size() == res2.history.size();
  if (deterministic)
    for (size_t i = 0; i < res.history.size(); ++i)
      if (res.history[i].train_loss != res2.history[i].train_loss ||
          res.history[i].val_rmse != res2.history[i].val_rmse)
        deterministic = false;

  const double secs = seconds_since(t0);
  const bool pass = best < 0.02 && deterministic && secs < 600.0;
  return {pass, "reduced MCA (H=8, f=8, m=2, dense [32,16]) on 64 pairs: train RMSE " +
                    fmt(best) + " at step " + std::to_string(best_step) +
                    " (limit 0.02 within 5000), deterministic rerun: " +
                    (deterministic ? "yes" : "no") + ", " + fmt(secs) + " s (limit 600)"};
}

// --------------------------------------------------------------------------
// 6. Split safety
// --------------------------------------------------------------------------

Outcome split_safety() {
  RngStream rng(31337);
  int leak_failures = 0, partition_failures = 0, determinism_failures = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const int n_drugs = 30 + static_cast<int>(rng.next_below(31));
    const int n_cells = 30 + static_cast<int>(rng.next_below(31));
    std::vector<std::string> drugs, cells;
    for (int d = 0; d < n_drugs; ++d)
      drugs.push_back("drug" + std::to_string(rng.next_u64() % 100000) + "_" +
                      std::to_string(d));
    for (int c = 0; c < n_cells; ++c)
      cells.push_back("cell" + std::to_string(rng.next_u64() % 100000) + "_" +
                      std::to_string(c));
    std::vector<data::PairSample> pairs;
    for (const auto& d : drugs)
      for (const auto& c : cells)
        if (rng.next_unit() < 0.8) pairs.push_back({d, c, rng.uniform(-4, 4)});

    auto plan = data::strict_split(drugs, cells, pairs, seed);
    if (plan.folds.size() != 25) ++leak_failures;
    std::set<std::string> test_d(plan.test_drugs.begin(), plan.test_drugs.end());
    std::set<std::string> test_c(plan.test_cells.begin(), plan.test_cells.end());
    for (const auto& fold : plan.folds) {
      std::set<std::string> vd(fold.val_drugs.begin(), fold.val_drugs.end());
      std::set<std::string> vc(fold.val_cells.begin(), fold.val_cells.end());
      for (const auto& [d, c] : fold.train)
        if (test_d.count(d) || test_c.count(c) || vd.count(d) || vc.count(c)) {
          ++leak_failures;
          break;
        }
      for (const auto& [d, c] : fold.validation)
        if (test_d.count(d) || test_c.count(c) || !vd.count(d) || !vc.count(c)) {
          ++leak_failures;
          break;
        }
      for (const auto& [d, c] : plan.test)
        if (!test_d.count(d) || !test_c.count(c)) {
          ++leak_failures;
          break;
        }
    }
    if (data::strict_split(drugs, cells, pairs, seed).serialize() != plan.serialize())
      ++determinism_failures;

    auto lenient = data::lenient_split(pairs, seed);
    std::set<data::PairKey> test_set(lenient.test.begin(), lenient.test.end());
    std::map<data::PairKey, int> val_count;
    bool bad = false;
    for (const auto& fold : lenient.folds) {
      std::set<data::PairKey> train_set(fold.train.begin(), fold.train.end());
      for (const auto& key : fold.validation) {
        if (test_set.count(key) || train_set.count(key)) bad = true;
        ++val_count[key];
      }
      if (fold.train.size() + fold.validation.size() + lenient.test.size() != pairs.size())
        bad = true;
    }
    if (val_count.size() != pairs.size() - lenient.test.size()) bad = true;
    for (const auto& [key, n] : val_count)
      if (n != 1) bad = true;
    if (bad) ++partition_failures;
    if (data::lenient_split(pairs, seed).serialize() != lenient.serialize())
      ++determinism_failures;
  }

  const bool pass = leak_failures == 0 && partition_failures == 0 && determinism_failures == 0;
  return {pass, "100 seeds: strict leakage failures " + std::to_string(leak_failures) +
                    ", lenient partition failures " + std::to_string(partition_failures) +
                    ", byte-identity failures " + std::to_string(determinism_failures)};
}

// --------------------------------------------------------------------------
// 7. Metrics and analysis oracles
// --------------------------------------------------------------------------

Outcome metric_oracles() {
  RngStream rng(600);
  double worst = 0.0;

  for (int trial = 0; trial < 20; ++trial) {
    const int n = 40;
    std::vector<double> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = rng.uniform(-5, 5);
      truth[i] = rng.uniform(-5, 5);
    }
    double se = 0, sp = 0, st = 0;
    for (int i = 0; i < n; ++i) {
      se += (pred[i] - truth[i]) * (pred[i] - truth[i]);
      sp += pred[i];
      st += truth[i];
    }
    const double mp = sp / n, mt = st / n;
    double cov = 0, vp = 0, vt = 0, ss_tot = 0;
    for (int i = 0; i < n; ++i) {
      cov += (pred[i] - mp) * (truth[i] - mt);
      vp += (pred[i] - mp) * (pred[i] - mp);
      vt += (truth[i] - mt) * (truth[i] - mt);
      ss_tot += (truth[i] - mt) * (truth[i] - mt);
    }
    worst = std::max(worst, std::abs(train::rmse(pred, truth) - std::sqrt(se / n)));
    worst = std::max(worst,
                     std::abs(train::pearson(pred, truth) - cov / std::sqrt(vp * vt)));
    worst = std::max(worst, std::abs(train::r_squared(pred, truth) - (1.0 - se / ss_tot)));
  }

  // Frobenius-Tanimoto pipeline against a fully independent computation on a
  // synthetic 3-drug panel.
  analysis::ProfilePanel panel;
  panel.cell_ids = {"c0", "c1", "c2", "c3"};
  RngStream prng(88);
  for (int d = 0; d < 3; ++d) {
    analysis::DrugProfile profile;
    profile.drug_id = "d" + std::to_string(d);
    const int t_len = 5 + d;
    for (int c = 0; c < 4; ++c) {
      std::vector<double> row(t_len);
      double sum = 0;
      for (auto& v : row) {
        v = prng.uniform(0.01, 1.0);
        sum += v;
      }
      for (auto& v : row) v /= sum;
      profile.token_attention.push_back(row);
      profile.gene_attention.push_back({0.5, 0.5});
    }
    panel.drugs.push_back(std::move(profile));
  }
  // Fingerprints via a fixture dataset is overkill here; build the pair
  // table directly from the library pieces and compare against a by-hand
  // Pearson over by-hand distances.
  std::vector<chem::Fingerprint> fps;
  for (int d = 0; d < 3; ++d) {
    chem::Fingerprint fp(256, 2);
    for (int k = 0; k < 30; ++k) fp.set(prng.next_below(256));
    fps.push_back(fp);
  }
  std::vector<double> xs, ys;
  for (int a = 0; a < 3; ++a) {
    auto ma = analysis::drug_distance_matrix(panel.drugs[a]);
    for (int b = 0; b < 3; ++b) {
      auto mb = analysis::drug_distance_matrix(panel.drugs[b]);
      xs.push_back(analysis::frobenius_distance(ma, mb));
      ys.push_back(chem::tanimoto(fps[a], fps[b]));
    }
  }
  // Independent recomputation from scratch.
  auto euclid = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
  };
  std::vector<double> xs_ref;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double acc = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const double da =
              euclid(panel.drugs[a].token_attention[i], panel.drugs[a].token_attention[j]);
          const double db =
              euclid(panel.drugs[b].token_attention[i], panel.drugs[b].token_attention[j]);
          acc += (da - db) * (da - db);
        }
      xs_ref.push_back(std::sqrt(acc));
    }
  for (size_t i = 0; i < xs.size(); ++i)
    worst = std::max(worst, std::abs(xs[i] - xs_ref[i]));
  worst = std::max(worst, std::abs(train::pearson(xs, ys) - train::pearson(xs_ref, ys)));

  // ORA p-values exact against subset enumeration for universes <= 15.
  bool ora_exact = analysis::hypergeometric_upper_tail(5, 5, 5, 10) == 1.0 / 252.0;
  RngStream orng(2024);
  for (int trial = 0; trial < 30 && ora_exact; ++trial) {
    const int total = 5 + static_cast<int>(orng.next_below(11));
    const int marked = static_cast<int>(orng.next_below(total + 1));
    const int draws = static_cast<int>(orng.next_below(total + 1));
    const int k = static_cast<int>(orng.next_below(draws + 2));
    uint64_t count = 0, all = 0;
    for (uint32_t m = 0; m < (1u << total); ++m) {
      if (std::popcount(m) != draws) continue;
      ++all;
      if (std::popcount(m & ((1u << marked) - 1u)) >= k) ++count;
    }
    const double expected = static_cast<double>(count) / static_cast<double>(all);
    if (analysis::hypergeometric_upper_tail(k, marked, draws, total) != expected)
      ora_exact = false;
  }

  const bool pass = worst < 1e-12 && ora_exact;
  return {pass, "metric/pipeline max |impl - reference| = " + fmt(worst) +
                    " (limit 1e-12); ORA exact vs enumeration incl. 1/252: " +
                    (ora_exact ? "yes" : "no")};
}

// --------------------------------------------------------------------------
// 8. Persistence
// --------------------------------------------------------------------------

Outcome persistence() {
  auto ds = fixture_dataset(2);
  std::vector<data::PairKey> keys;
  for (const auto& p : ds.pairs()) keys.emplace_back(p.drug_id, p.cell_id);

  bool round_trip_ok = true, ensemble_ok = true;
  std::string failed_kind;
  for (models::ModelKind kind : all_kinds()) {
    models::ModelSpec spec = train::bind_spec(toy_spec(kind), ds);
    auto [label_tf, expr_tf] = train::fit_fold_transforms(ds, ds.pairs());
    train::TrainConfig cfg;
    cfg.max_steps = 4;
    cfg.eval_interval = 2;
    cfg.batch_size = 12;
    cfg.seed = 21 + static_cast<uint64_t>(kind);
    cfg.augment = false;
    auto res = train::train(spec, ds, ds.pairs(), ds.pairs(), label_tf, expr_tf, cfg);
    const train::Checkpoint& ckpt = res.best.front();

    auto direct = train::predict(ckpt, ds, keys, false);
    const std::string path =
        (fs::temp_directory_path() / ("pacc_acc_" + models::kind_name(kind) + ".ckpt")).string();
    ckpt.save(path);
    auto reloaded = train::predict(train::Checkpoint::load(path), ds, keys, false);
    fs::remove(path);
    for (size_t i = 0; i < direct.size(); ++i)
      if (direct[i] != reloaded[i]) {
        round_trip_ok = false;
        failed_kind = models::kind_name(kind);
      }

    if (kind == models::ModelKind::kSa) {
      auto single = train::predict(ckpt, ds, keys, false);
      for (int k : {2, 3, 5}) {
        std::vector<train::Checkpoint> members(static_cast<size_t>(k), ckpt);
        auto ens = train::ensemble_predict(members, ds, keys);
        for (size_t i = 0; i < single.size(); ++i)
          if (ens[i] != single[i]) ensemble_ok = false;
      }
    }
  }

  const bool pass = round_trip_ok && ensemble_ok;
  return {pass, std::string("save/load/predict bit-identical for all six kinds: ") +
                    (round_trip_ok ? "yes" : ("no (" + failed_kind + ")")) +
                    ", ensemble of k identical == single exactly (k=2,3,5): " +
                    (ensemble_ok ? "yes" : "no")};
}

// --------------------------------------------------------------------------
// 9. Service consistency
// --------------------------------------------------------------------------

Outcome service_consistency() {
  const std::string dir = (fs::temp_directory_path() / "pacc_acc_serve").string();
  fs::remove_all(dir);
  write_fixture_files(dir);

  // Train a small MCA checkpoint through the CLI so the comparison covers
  // the real command-line path end to end.
  if (cli::dispatch({"train", "--expression", dir + "/expression.tsv", "--smiles",
                     dir + "/smiles.tsv", "--responses", dir + "/responses.tsv", "--panel",
                     dir + "/panel.txt", "--protocol", "lenient", "--model", "MCA",
                     "--augment-n", "2", "--steps", "4", "--batch", "12", "--eval-interval",
                     "2", "--fold", "0", "--seed", "5", "--out", dir + "/train"}) != 0)
    return {false, "CLI training run failed"};
  const std::string ckpt_path = dir + "/train/fold0_best.ckpt";

  if (cli::dispatch({"predict", "--checkpoint", ckpt_path, "--expression",
                     dir + "/expression.tsv", "--smiles", dir + "/smiles.tsv", "--augment-n",
                     "2", "--pairs", dir + "/responses.tsv", "--out", dir + "/pred"}) != 0)
    return {false, "CLI predict run failed"};

  std::map<std::pair<std::string, std::string>, double> cli_pred;
  {
    auto lines = data::read_lines(dir + "/pred/predictions.tsv");
    for (size_t ln = 1; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      auto cols = data::split_tsv(lines[ln]);
      cli_pred[{cols[0], cols[1]}] = std::stod(cols[2]);
    }
  }

  serve::ServerContext ctx = serve::ServerContext::load(ckpt_path, dir + "/expression.tsv");
  auto server = serve::make_server(ctx);
  const int port = server->bind_to_any_port("127.0.0.1");
  std::thread listener([&]() { server->listen_after_bind(); });
  server->wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);

  auto smiles_rows = fixture_smiles().rows;
  RngStream rng(123);
  int exact = 0;
  const int n_requests = 50;
  for (int trial = 0; trial < n_requests; ++trial) {
    const auto& [drug, smi] = smiles_rows[rng.next_below(smiles_rows.size())];
    const size_t cell = rng.next_below(ctx.cell_ids.size());
    nlohmann::json req = {{"smiles", smi}, {"cell_id", ctx.cell_ids[cell]}};
    auto res = client.Post("/v1/predict", req.dump(), "application/json");
    if (!res || res->status != 200) continue;
    auto body = nlohmann::json::parse(res->body);
    const double via_http = body["ic50_log"].get<double>();
    const double via_cli = cli_pred.at({drug, ctx.cell_ids[cell]});
    auto direct = train::predict_single(ctx.ckpt, *ctx.model, smi, ctx.cell_expression[cell]);
    if (via_http == via_cli && via_http == direct.ic50_log) ++exact;
  }

  // Malformed SMILES maps to 400 with the parser detail.
  nlohmann::json bad = {{"smiles", "C1CC"}, {"cell_id", ctx.cell_ids[0]}};
  auto bad_res = client.Post("/v1/predict", bad.dump(), "application/json");
  bool error_ok = bad_res && bad_res->status == 400;
  if (error_ok) {
    auto body = nlohmann::json::parse(bad_res->body);
    error_ok = body["error"] == "UnclosedRingBond" &&
               body["detail"].get<std::string>().find("offset") != std::string::npos;
  }

  server->stop();
  listener.join();
  fs::remove_all(dir);

  const bool pass = exact == n_requests && error_ok;
  return {pass, std::to_string(exact) + "/" + std::to_string(n_requests) +
                    " randomized requests value-exact vs CLI and library; malformed SMILES "
                    "-> 400 UnclosedRingBond: " +
                    (error_ok ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"propagation-oracle", propagation_oracle},
      {"chem-round-trips", chem_round_trips},
      {"gradient-suite", gradient_suite},
      {"attention-invariants", attention_invariants},
      {"overfit-target", overfit_target},
      {"split-safety", split_safety},
      {"metrics-analysis-oracles", metric_oracles},
      {"persistence", persistence},
      {"service-consistency", service_consistency},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %s: %s\n", outcome.pass ? "PASS" : "FAIL", c.name,
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
