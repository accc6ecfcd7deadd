#include "pacc/train/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>
#include <unordered_map>

namespace pacc::train {

void TrainConfig::validate() const {
  if (max_steps < 0) throw Error("InvalidConfig", "max_steps must be >= 0");
  if (batch_size < 1) throw Error("InvalidConfig", "batch_size must be >= 1");
  if (eval_interval < 1) throw Error("InvalidConfig", "eval_interval must be >= 1");
  if (max_steps > 0 && eval_interval > max_steps)
    throw Error("InvalidConfig", "eval_interval must not exceed max_steps");
  if (checkpoint_keep < 1) throw Error("InvalidConfig", "checkpoint_keep must be >= 1");
}

std::pair<data::LabelTransform, data::ExpressionTransform> fit_fold_transforms(
    const data::Dataset& ds, const std::vector<data::PairSample>& train_pairs) {
  if (train_pairs.empty()) throw Error("EmptyFold", "cannot fit transforms on zero pairs");
  std::vector<double> labels;
  labels.reserve(train_pairs.size());
  std::set<std::string> cell_ids;
  for (const auto& p : train_pairs) {
    labels.push_back(p.label);
    cell_ids.insert(p.cell_id);
  }
  std::vector<std::vector<double>> cells;
  for (const std::string& id : cell_ids) cells.push_back(ds.cell(id).expression);
  return {data::LabelTransform::fit(labels), data::ExpressionTransform::fit(cells)};
}

std::vector<data::PairSample> resolve_pairs(const data::Dataset& ds,
                                            const std::vector<data::PairKey>& keys) {
  std::unordered_map<std::string, double> labels;
  labels.reserve(ds.pairs().size());
  for (const auto& p : ds.pairs()) labels[p.drug_id + "\t" + p.cell_id] = p.label;
  std::vector<data::PairSample> out;
  out.reserve(keys.size());
  for (const auto& [d, c] : keys) {
    auto it = labels.find(d + "\t" + c);
    if (it == labels.end())
      throw Error("UnknownPair", "pair (" + d + ", " + c + ") has no observed response");
    out.push_back({d, c, it->second});
  }
  return out;
}

BatchBuilder::BatchBuilder(const data::Dataset& ds, const data::LabelTransform& label_tf,
                           const data::ExpressionTransform& expr_tf, bool want_fingerprints)
    : ds_(ds), label_tf_(label_tf), expr_tf_(expr_tf), want_fingerprints_(want_fingerprints) {
  transformed_cells_.reserve(ds.cells().size());
  for (const auto& cell : ds.cells()) {
    std::vector<double> t = expr_tf_.apply(cell.expression);
    transformed_cells_.emplace_back(t.begin(), t.end());
  }
  if (want_fingerprints_) {
    fingerprint_rows_.reserve(ds.drugs().size());
    for (const auto& drug : ds.drugs()) {
      std::vector<float> row(drug.fingerprint.width);
      for (int b = 0; b < drug.fingerprint.width; ++b)
        row[b] = drug.fingerprint.test(static_cast<uint64_t>(b)) ? 1.0f : 0.0f;
      fingerprint_rows_.push_back(std::move(row));
    }
  }
}

models::Batch<float> BatchBuilder::assemble(const std::vector<data::PairSample>& pairs,
                                            const std::vector<data::SampleRef>& refs,
                                            std::vector<float>* targets) const {
  models::Batch<float> batch;
  batch.batch = static_cast<int>(refs.size());
  int t_len = 1;
  for (const auto& ref : refs) {
    const auto& pair = pairs[static_cast<size_t>(ref.pair_index)];
    const auto& drug = ds_.drugs()[static_cast<size_t>(ds_.drug_index(pair.drug_id))];
    t_len = std::max(t_len,
                     static_cast<int>(drug.variant_ids[static_cast<size_t>(ref.variant_index)].size()));
  }
  batch.t_len = t_len;
  batch.token_ids.assign(refs.size() * static_cast<size_t>(t_len), 0);
  batch.pad_mask.assign(refs.size() * static_cast<size_t>(t_len), 0);
  const int gdim = static_cast<int>(ds_.panel().size());
  batch.genes.resize(refs.size() * static_cast<size_t>(gdim));
  if (targets) targets->resize(refs.size());
  if (want_fingerprints_ && !ds_.drugs().empty())
    batch.fingerprints.resize(refs.size() * fingerprint_rows_[0].size());

  for (size_t r = 0; r < refs.size(); ++r) {
    const auto& pair = pairs[static_cast<size_t>(refs[r].pair_index)];
    const int di = ds_.drug_index(pair.drug_id);
    const int ci = ds_.cell_index(pair.cell_id);
    if (di < 0) throw Error("UnknownDrugId", "drug '" + pair.drug_id + "'");
    if (ci < 0) throw Error("UnknownCellId", "cell '" + pair.cell_id + "'");
    const auto& ids = ds_.drugs()[di].variant_ids[static_cast<size_t>(refs[r].variant_index)];
    for (size_t t = 0; t < ids.size(); ++t) {
      batch.token_ids[r * t_len + t] = ids[t];
      batch.pad_mask[r * t_len + t] = 1;
    }
    const auto& cell = transformed_cells_[static_cast<size_t>(ci)];
    std::copy(cell.begin(), cell.end(), batch.genes.begin() + r * gdim);
    if (want_fingerprints_) {
      const auto& fp = fingerprint_rows_[static_cast<size_t>(di)];
      std::copy(fp.begin(), fp.end(), batch.fingerprints.begin() + r * fp.size());
    }
    if (targets) (*targets)[r] = static_cast<float>(label_tf_.apply(pair.label));
  }
  return batch;
}

double evaluate_rmse(models::Encoder<float>& model, const BatchBuilder& builder,
                     const std::vector<data::PairSample>& pairs, int batch_size) {
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  size_t done = 0;
  while (done < pairs.size()) {
    const size_t end = std::min(pairs.size(), done + static_cast<size_t>(batch_size));
    std::vector<data::SampleRef> refs;
    for (size_t i = done; i < end; ++i) refs.push_back({static_cast<int>(i), 0});
    std::vector<float> targets;
    auto batch = builder.assemble(pairs, refs, &targets);
    nn::Graph<float> g;
    auto out = model.forward(g, batch, nn::Mode::kEval);
    for (size_t i = 0; i < targets.size(); ++i) {
      const double d = static_cast<double>(out.prediction->value[i]) - targets[i];
      acc += d * d;
    }
    done = end;
  }
  return std::sqrt(acc / static_cast<double>(pairs.size()));
}

namespace {

// Retention key: smaller validation RMSE wins, ties to the earlier step.
// NaN (no validation set) ranks after every real value.
bool better(const Checkpoint& a, const Checkpoint& b) {
  const double ra = std::isnan(a.val_rmse) ? std::numeric_limits<double>::infinity() : a.val_rmse;
  const double rb = std::isnan(b.val_rmse) ? std::numeric_limits<double>::infinity() : b.val_rmse;
  if (ra != rb) return ra < rb;
  return a.step < b.step;
}

void retain_best(std::vector<Checkpoint>& best, Checkpoint candidate, int keep) {
  best.push_back(std::move(candidate));
  std::sort(best.begin(), best.end(), better);
  if (static_cast<int>(best.size()) > keep) best.resize(static_cast<size_t>(keep));
}

}  // namespace

TrainResult train(const models::ModelSpec& spec, const data::Dataset& ds,
                  const std::vector<data::PairSample>& train_pairs,
                  const std::vector<data::PairSample>& val_pairs,
                  const data::LabelTransform& label_tf,
                  const data::ExpressionTransform& expr_tf, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (!label_tf.fitted || !expr_tf.fitted)
    throw Error("TransformNotFitted", "train requires transforms fitted on the fold");

  RngStream root(cfg.seed);
  RngStream init_rng = root.fork(1);
  models::Encoder<float> model(spec, init_rng);
  RngStream dropout_rng = root.fork(2);

  BatchBuilder builder(ds, label_tf, expr_tf, spec.kind == models::ModelKind::kDnn);

  TrainResult result;
  auto snapshot = [&](int64_t step, double val) {
    return Checkpoint::capture(model, step, val, cfg.seed, ds.vocab().tokens(), ds.panel(),
                               label_tf, expr_tf);
  };

  if (cfg.max_steps == 0) {
    const double val = evaluate_rmse(model, builder, val_pairs, cfg.batch_size);
    retain_best(result.best, snapshot(0, val), cfg.checkpoint_keep);
    return result;
  }
  if (train_pairs.empty()) throw Error("EmptyFold", "no training pairs");

  nn::AdamState<float> adam;
  adam.schedule = cfg.schedule;
  adam.attach(model.parameter_tensors());

  std::vector<std::vector<data::SampleRef>> batches;
  size_t batch_cursor = 0;
  uint64_t epoch = 0;

  // Train-mode batch norm needs >= 2 rows; a trailing 1-sample batch is
  // skipped rather than stepped on.
  auto next_refs = [&]() -> const std::vector<data::SampleRef>& {
    while (true) {
      if (batch_cursor >= batches.size()) {
        RngStream epoch_rng = root.fork(1000 + epoch);
        batches = data::make_batches(ds, train_pairs, cfg.batch_size, cfg.augment, epoch_rng);
        batch_cursor = 0;
        ++epoch;
        if (batches.size() == 1 && batches[0].size() < 2)
          throw Error("BatchTooSmall", "training stream holds fewer than 2 samples");
      }
      const auto& refs = batches[batch_cursor++];
      if (refs.size() >= 2) return refs;
    }
  };

  for (int64_t step = 1; step <= cfg.max_steps; ++step) {
    std::vector<float> targets;
    auto batch = builder.assemble(train_pairs, next_refs(), &targets);

    nn::Graph<float> g;
    auto out = model.forward(g, batch, nn::Mode::kTrain, &dropout_rng);
    auto loss = nn::mse_loss(g, out.prediction, targets);
    const double loss_value = static_cast<double>(loss->value[0]);
    if (!std::isfinite(loss_value))
      throw Error("NonFiniteLoss", "loss diverged at step " + std::to_string(step));

    model.zero_grad();
    g.backward(loss);
    auto stepped = nn::adam_step(model.parameter_tensors(), adam);
    if (!stepped.applied)
      throw Error("NonFiniteGradient", "gradient diverged at step " + std::to_string(step));

    if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
      const double val = evaluate_rmse(model, builder, val_pairs, cfg.batch_size);
      result.history.push_back({step, loss_value, val});
      retain_best(result.best, snapshot(step, val), cfg.checkpoint_keep);
    }
  }
  return result;
}

CrossValidation cross_validate(const models::ModelSpec& spec, const data::Dataset& ds,
                               const data::SplitPlan& plan, const TrainConfig& cfg,
                               int threads) {
  if (plan.folds.empty()) throw Error("EmptyPlan", "split plan has no folds");
  auto test_pairs = resolve_pairs(ds, plan.test);

  std::vector<MetricReport> reports(plan.folds.size());
  auto run_fold = [&](size_t f) {
    auto train_pairs = resolve_pairs(ds, plan.folds[f].train);
    auto val_pairs = resolve_pairs(ds, plan.folds[f].validation);
    auto [label_tf, expr_tf] = fit_fold_transforms(ds, train_pairs);
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = RngStream(cfg.seed).fork(9000 + f).seed();
    TrainResult res = train(spec, ds, train_pairs, val_pairs, label_tf, expr_tf, fold_cfg);

    models::Encoder<float> best = res.best.front().instantiate();
    BatchBuilder builder(ds, label_tf, expr_tf, spec.kind == models::ModelKind::kDnn);
    std::vector<double> pred_norm, truth_norm;
    size_t done = 0;
    while (done < test_pairs.size()) {
      const size_t end = std::min(test_pairs.size(), done + static_cast<size_t>(cfg.batch_size));
      std::vector<data::SampleRef> refs;
      for (size_t i = done; i < end; ++i) refs.push_back({static_cast<int>(i), 0});
      std::vector<float> targets;
      auto batch = builder.assemble(test_pairs, refs, &targets);
      nn::Graph<float> g;
      auto out = best.forward(g, batch, nn::Mode::kEval);
      for (size_t i = 0; i < targets.size(); ++i) {
        pred_norm.push_back(static_cast<double>(out.prediction->value[i]));
        truth_norm.push_back(static_cast<double>(targets[i]));
      }
      done = end;
    }
    reports[f] = compute_metrics(pred_norm, truth_norm, label_tf);
  };

  if (threads <= 1) {
    for (size_t f = 0; f < plan.folds.size(); ++f) run_fold(f);
  } else {
    std::atomic<size_t> cursor{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(plan.folds.size()));
    for (int t = 0; t < n; ++t)
      pool.emplace_back([&]() {
        for (size_t f = cursor.fetch_add(1); f < plan.folds.size(); f = cursor.fetch_add(1))
          run_fold(f);
      });
    for (auto& t : pool) t.join();
  }

  CrossValidation cv;
  cv.per_fold = reports;
  std::vector<double> rmses, rmse_logs, pearsons, r2s;
  for (const auto& r : reports) {
    rmses.push_back(r.rmse);
    rmse_logs.push_back(r.rmse_log);
    pearsons.push_back(r.pearson);
    r2s.push_back(r.r2);
  }
  cv.median_rmse = median(rmses);
  cv.iqr_rmse = iqr(rmses);
  cv.median_rmse_log = median(rmse_logs);
  cv.iqr_rmse_log = iqr(rmse_logs);
  cv.median_pearson = median(pearsons);
  cv.iqr_pearson = iqr(pearsons);
  cv.median_r2 = median(r2s);
  cv.iqr_r2 = iqr(r2s);
  return cv;
}

models::ModelSpec bind_spec(models::ModelSpec spec, const data::Dataset& ds) {
  spec.vocab_size = static_cast<int>(ds.vocab().size());
  spec.panel_size = static_cast<int>(ds.panel().size());
  spec.max_len = std::max(spec.max_len, ds.max_len());
  if (!ds.drugs().empty()) spec.fingerprint_width = ds.drugs()[0].fingerprint.width;
  return spec;
}

}  // namespace pacc::train
