#pragma once

#include <cstdint>
#include <vector>

#include "pacc/data/batching.hpp"
#include "pacc/data/dataset.hpp"
#include "pacc/data/split.hpp"
#include "pacc/nn/adam.hpp"
#include "pacc/train/checkpoint.hpp"
#include "pacc/train/metrics.hpp"

namespace pacc::train {

// Defaults match the full-run training procedure (batch 2048, 500k-step
// budget, 20 retained checkpoints); desk-scale runs override them.
struct TrainConfig {
  int64_t max_steps = 500000;
  int batch_size = 2048;
  int eval_interval = 1000;
  int checkpoint_keep = 20;
  uint64_t seed = 0;
  bool augment = true;
  nn::LrSchedule schedule;

  void validate() const;
};

struct HistoryRow {
  int64_t step = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
};

struct TrainResult {
  std::vector<Checkpoint> best;  // ordered by (validation RMSE, step)
  std::vector<HistoryRow> history;
};

// Fits the fold-local transforms on the training pairs only: label min-max
// over the train labels, expression z-score over the cells that appear in a
// training pair.
std::pair<data::LabelTransform, data::ExpressionTransform> fit_fold_transforms(
    const data::Dataset& ds, const std::vector<data::PairSample>& train_pairs);

// Resolves (drug, cell) keys back to labeled samples via the dataset's
// observed pairs.
std::vector<data::PairSample> resolve_pairs(const data::Dataset& ds,
                                            const std::vector<data::PairKey>& keys);

// Assembles model batches from sample references. Sequences are padded to
// the longest variant in the batch; expression rows are transformed once and
// cached.
class BatchBuilder {
 public:
  BatchBuilder(const data::Dataset& ds, const data::LabelTransform& label_tf,
               const data::ExpressionTransform& expr_tf, bool want_fingerprints);

  models::Batch<float> assemble(const std::vector<data::PairSample>& pairs,
                                const std::vector<data::SampleRef>& refs,
                                std::vector<float>* targets) const;

  const data::LabelTransform& label_tf() const { return label_tf_; }

 private:
  const data::Dataset& ds_;
  data::LabelTransform label_tf_;
  data::ExpressionTransform expr_tf_;
  bool want_fingerprints_;
  std::vector<std::vector<float>> transformed_cells_;
  std::vector<std::vector<float>> fingerprint_rows_;
};

// Deterministic step loop: periodic validation, best-k checkpoint retention
// (k smallest validation RMSEs, ties to the earlier step). Aborts with
// NonFiniteLoss / NonFiniteGradient diagnostics naming the step.
TrainResult train(const models::ModelSpec& spec, const data::Dataset& ds,
                  const std::vector<data::PairSample>& train_pairs,
                  const std::vector<data::PairSample>& val_pairs,
                  const data::LabelTransform& label_tf,
                  const data::ExpressionTransform& expr_tf, const TrainConfig& cfg);

// Eval-mode validation RMSE on the normalized scale (canonical variant).
double evaluate_rmse(models::Encoder<float>& model, const BatchBuilder& builder,
                     const std::vector<data::PairSample>& pairs, int batch_size);

struct CrossValidation {
  std::vector<MetricReport> per_fold;  // test-set metrics per fold
  double median_rmse = 0.0, iqr_rmse = 0.0;
  double median_rmse_log = 0.0, iqr_rmse_log = 0.0;
  double median_pearson = 0.0, iqr_pearson = 0.0;
  double median_r2 = 0.0, iqr_r2 = 0.0;
};

// Trains one model per fold (in parallel when threads > 1), evaluates the
// best checkpoint on the plan's test pairs, and summarizes with
// linear-interpolation median and IQR.
CrossValidation cross_validate(const models::ModelSpec& spec, const data::Dataset& ds,
                               const data::SplitPlan& plan, const TrainConfig& cfg,
                               int threads = 1);

// Completes a ModelSpec with the dataset-dependent fields (vocab, panel,
// max sequence length).
models::ModelSpec bind_spec(models::ModelSpec spec, const data::Dataset& ds);

}  // namespace pacc::train
