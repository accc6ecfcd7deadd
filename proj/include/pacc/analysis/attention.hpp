#pragma once

#include <map>
#include <string>
#include <vector>

#include "pacc/data/dataset.hpp"
#include "pacc/train/checkpoint.hpp"

namespace pacc::analysis {

// Attention profiles of one drug across a fixed cell panel. Token attention
// is averaged over all heads/channels; the canonical (non-augmented) SMILES
// is used throughout.
struct DrugProfile {
  std::string drug_id;
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> token_attention;  // [cell][T]
  std::vector<std::vector<double>> gene_attention;   // [cell][|G|]
};

struct ProfilePanel {
  std::vector<std::string> cell_ids;
  std::vector<DrugProfile> drugs;
};

using Matrix = std::vector<std::vector<double>>;

// Eval-mode forward per (drug, cell). Requires an attention-capable model
// (SA, CA or MCA); DNN/bRNN/SCNN raise ModelWithoutAttention.
ProfilePanel collect_profiles(const train::Checkpoint& ckpt, const data::Dataset& ds,
                              const std::vector<std::string>& drug_ids,
                              const std::vector<std::string>& cell_ids);

// Which per-cell profile the distance matrices are built from.
enum class ProfileKind { kToken, kGene };

// Pairwise Euclidean distances between a drug's per-cell attention
// profiles (token attention by default). Symmetric, zero diagonal.
Matrix drug_distance_matrix(const DrugProfile& drug, ProfileKind kind = ProfileKind::kToken);

double frobenius_distance(const Matrix& a, const Matrix& b);

struct CorrelationResult {
  double pearson = 0.0;
  bool defined = true;  // false when either side is constant
  int n = 0;            // ordered pairs including self-pairs: drugs^2
  struct Row {
    std::string drug_a, drug_b;
    double frobenius = 0.0;
    double tanimoto = 0.0;
  };
  std::vector<Row> table;
};

// Correlates attention-distance structure with fingerprint similarity over
// every ordered drug pair (n = drugs^2, matching the self-pair convention).
CorrelationResult attention_structure_correlation(const ProfilePanel& panel,
                                                  const data::Dataset& ds);

// Mean gene attention over all profiles; genes with a_i < 1/K are discarded
// (uniform attention keeps everything, since 1/K is not below 1/K).
std::vector<std::string> aggregate_gene_attention(const ProfilePanel& panel,
                                                  const std::vector<std::string>& gene_panel);

}  // namespace pacc::analysis
