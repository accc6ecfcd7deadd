#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacc/data/dataset.hpp"

namespace pacc::data {

enum class Protocol { kStrict, kLenient };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

using PairKey = std::pair<std::string, std::string>;  // (drug_id, cell_id)

// Fold-wise assignment of drugs, cells and pairs. Strict folds guarantee
// entity-level disjointness (drugs and cells never shared between train,
// validation and test); lenient folds only guarantee pair-level
// disjointness.
struct SplitPlan {
  Protocol protocol = Protocol::kStrict;
  uint64_t seed = 0;

  std::vector<std::string> test_drugs, test_cells;  // strict only
  std::vector<PairKey> test;

  struct Fold {
    std::vector<std::string> val_drugs, val_cells;  // strict only
    std::vector<PairKey> train;
    std::vector<PairKey> validation;
  };
  std::vector<Fold> folds;

  // Versioned plain-text serialization; byte-identical for identical seeds.
  std::string serialize() const;
  static SplitPlan parse(const std::string& text);
};

constexpr int kStrictFolds = 25;
constexpr int kLenientFolds = 5;
constexpr double kTestFraction = 0.10;
constexpr double kValidationFraction = 0.04;

// Strict protocol: floor(10%) of drugs and cells form the test block; each
// of 25 folds draws floor(4%) of the remaining pools as validation entities,
// independently per fold. Cross pairs (validation drug with train cell and
// vice versa) are discarded.
SplitPlan strict_split(const std::vector<std::string>& drug_ids,
                       const std::vector<std::string>& cell_ids,
                       const std::vector<PairSample>& pairs, uint64_t seed,
                       int n_folds = kStrictFolds);

// Lenient protocol: floor(10%) of shuffled pairs go to test; the remainder
// is partitioned into 5 folds, fold k serving as validation.
SplitPlan lenient_split(const std::vector<PairSample>& pairs, uint64_t seed,
                        int n_folds = kLenientFolds);

}  // namespace pacc::data
