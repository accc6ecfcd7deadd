#pragma once

#include <string>
#include <vector>

#include "pacc/data/dataset.hpp"
#include "pacc/data/split.hpp"
#include "pacc/train/checkpoint.hpp"

namespace pacc::train {

// Eval-mode predictions on the log-IC50 scale, aligned to `pairs`. Pairs are
// grouped by (drug, variant) so every sequence runs at its exact token
// length; with augment_average the predictions over a drug's stored variants
// are averaged on the normalized scale before inversion.
std::vector<double> predict(const Checkpoint& ckpt, const data::Dataset& ds,
                            const std::vector<data::PairKey>& pairs, bool augment_average);

// Unweighted mean of member predictions on the normalized scale, inverted
// through the (shared) label transform of the first member.
std::vector<double> ensemble_predict(const std::vector<Checkpoint>& checkpoints,
                                     const data::Dataset& ds,
                                     const std::vector<data::PairKey>& pairs);

// Single-pair path shared verbatim by the CLI and the HTTP service.
struct SinglePrediction {
  std::string canonical;
  std::vector<std::string> tokens;
  double ic50_normalized = 0.0;
  double ic50_log = 0.0;
  std::vector<double> gene_attention;   // panel order; empty when the model has none
  std::vector<double> token_attention;  // mean over heads; empty when the model has none
};

SinglePrediction predict_single(const Checkpoint& ckpt, models::Encoder<float>& model,
                                const std::string& smiles,
                                const std::vector<double>& raw_expression);

// Throws VocabMismatch / PanelMismatch when the checkpoint and dataset
// disagree.
void check_compatibility(const Checkpoint& ckpt, const data::Dataset& ds);

}  // namespace pacc::train
