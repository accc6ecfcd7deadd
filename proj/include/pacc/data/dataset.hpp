#pragma once

#include <map>
#include <string>
#include <vector>

#include "pacc/chem/fingerprint.hpp"
#include "pacc/chem/token.hpp"
#include "pacc/data/tables.hpp"
#include "pacc/error.hpp"

namespace pacc::data {

struct PairSample {
  std::string drug_id;
  std::string cell_id;
  double label = 0.0;  // log-IC50
};

struct DrugRecord {
  std::string drug_id;
  std::string smiles;       // as ingested
  std::string canonical;
  chem::Fingerprint fingerprint;
  std::vector<std::string> variants;            // canonical first, then augmented
  std::vector<std::vector<int>> variant_ids;    // unpadded token ids per variant
};

struct CellRecord {
  std::string cell_id;
  std::vector<double> expression;  // raw values in panel order
};

// Only observed (drug, cell, label) triples become pairs; rows referencing
// unknown ids are rejected with their row number.
std::vector<PairSample> pair_samples(const std::vector<std::string>& drug_ids,
                                     const std::vector<std::string>& cell_ids,
                                     const std::vector<ResponseRow>& responses);

// Assembled modeling dataset: parsed/augmented drugs, panel-projected cells,
// observed pairs, and the token vocabulary built over every stored variant.
class Dataset {
 public:
  static Dataset build(const SmilesTable& smiles, const ExpressionTable& expression,
                       const std::vector<ResponseRow>& responses,
                       const std::vector<std::string>& panel, int augment_n = 32,
                       uint64_t augment_seed = 0);

  const std::vector<DrugRecord>& drugs() const { return drugs_; }
  const std::vector<CellRecord>& cells() const { return cells_; }
  const std::vector<PairSample>& pairs() const { return pairs_; }
  const std::vector<std::string>& panel() const { return panel_; }
  const chem::Vocabulary& vocab() const { return vocab_; }
  int max_len() const { return max_len_; }

  int drug_index(const std::string& id) const;
  int cell_index(const std::string& id) const;
  const DrugRecord& drug(const std::string& id) const { return drugs_[checked_drug(id)]; }
  const CellRecord& cell(const std::string& id) const { return cells_[checked_cell(id)]; }

 private:
  int checked_drug(const std::string& id) const;
  int checked_cell(const std::string& id) const;

  std::vector<DrugRecord> drugs_;
  std::vector<CellRecord> cells_;
  std::vector<PairSample> pairs_;
  std::vector<std::string> panel_;
  chem::Vocabulary vocab_;
  std::map<std::string, int> drug_index_;
  std::map<std::string, int> cell_index_;
  int max_len_ = 0;
};

}  // namespace pacc::data
