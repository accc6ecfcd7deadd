#include "pacc/data/dataset.hpp"

#include <algorithm>

#include "pacc/chem/mol.hpp"
#include "pacc/rng.hpp"

namespace pacc::data {

std::vector<PairSample> pair_samples(const std::vector<std::string>& drug_ids,
                                     const std::vector<std::string>& cell_ids,
                                     const std::vector<ResponseRow>& responses) {
  std::set<std::string> drugs(drug_ids.begin(), drug_ids.end());
  std::set<std::string> cells(cell_ids.begin(), cell_ids.end());
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<PairSample> out;
  out.reserve(responses.size());
  for (size_t r = 0; r < responses.size(); ++r) {
    const ResponseRow& row = responses[r];
    if (!drugs.count(row.drug_id))
      throw Error("UnknownDrugId",
                  "row " + std::to_string(r + 1) + ": drug '" + row.drug_id + "'");
    if (!cells.count(row.cell_id))
      throw Error("UnknownCellId",
                  "row " + std::to_string(r + 1) + ": cell '" + row.cell_id + "'");
    if (!seen.emplace(row.drug_id, row.cell_id).second)
      throw Error("DuplicateId", "row " + std::to_string(r + 1) + ": pair (" + row.drug_id +
                                     ", " + row.cell_id + ") appears twice");
    out.push_back({row.drug_id, row.cell_id, row.log_ic50});
  }
  return out;
}

Dataset Dataset::build(const SmilesTable& smiles, const ExpressionTable& expression,
                       const std::vector<ResponseRow>& responses,
                       const std::vector<std::string>& panel, int augment_n,
                       uint64_t augment_seed) {
  if (augment_n < 1) throw Error("InvalidCount", "augment_n must be >= 1");
  Dataset ds;
  ds.panel_ = panel;

  // Panel projection indices into the expression table.
  std::vector<int> col(panel.size(), -1);
  {
    std::map<std::string, int> gene_col;
    for (size_t c = 0; c < expression.genes.size(); ++c)
      gene_col[expression.genes[c]] = static_cast<int>(c);
    for (size_t p = 0; p < panel.size(); ++p) {
      auto it = gene_col.find(panel[p]);
      if (it == gene_col.end())
        throw Error("MissingGene",
                    "panel gene '" + panel[p] + "' absent from the expression table");
      col[p] = it->second;
    }
  }

  RngStream rng(augment_seed);
  std::vector<std::string> corpus;
  for (const auto& [drug_id, smi] : smiles.rows) {
    DrugRecord rec;
    rec.drug_id = drug_id;
    rec.smiles = smi;
    chem::MolGraph mol;
    try {
      mol = chem::parse_smiles(smi);
    } catch (const chem::ParseError& e) {
      throw Error("MalformedSmiles", "drug '" + drug_id + "': " + e.what());
    }
    rec.canonical = chem::canonical_form(mol);
    rec.fingerprint = chem::morgan_fingerprint(mol);
    rec.variants.push_back(rec.canonical);
    if (augment_n > 1) {
      // Deterministic per-drug substream; duplicates of the canonical form
      // are dropped so each stored variant is distinct.
      RngStream sub = rng.fork(stable_hash(drug_id));
      for (const std::string& v : chem::enumerate_smiles(mol, augment_n, sub.next_u64())) {
        if (v == rec.canonical) continue;
        if (static_cast<int>(rec.variants.size()) >= augment_n) break;
        rec.variants.push_back(v);
      }
    }
    for (const std::string& v : rec.variants) corpus.push_back(v);
    ds.drug_index_[drug_id] = static_cast<int>(ds.drugs_.size());
    ds.drugs_.push_back(std::move(rec));
  }

  ds.vocab_ = chem::Vocabulary::build(corpus);
  for (DrugRecord& rec : ds.drugs_) {
    for (const std::string& v : rec.variants) {
      chem::TokenSequence t = chem::tokenize(v);
      ds.vocab_.encode(t);
      rec.variant_ids.push_back(t.ids);
      ds.max_len_ = std::max(ds.max_len_, t.length());
    }
  }

  for (size_t r = 0; r < expression.cells.size(); ++r) {
    CellRecord cell;
    cell.cell_id = expression.cells[r];
    cell.expression.resize(panel.size());
    for (size_t p = 0; p < panel.size(); ++p)
      cell.expression[p] = expression.values[r][static_cast<size_t>(col[p])];
    ds.cell_index_[cell.cell_id] = static_cast<int>(ds.cells_.size());
    ds.cells_.push_back(std::move(cell));
  }

  std::vector<std::string> drug_ids, cell_ids;
  for (const auto& d : ds.drugs_) drug_ids.push_back(d.drug_id);
  for (const auto& c : ds.cells_) cell_ids.push_back(c.cell_id);
  ds.pairs_ = pair_samples(drug_ids, cell_ids, responses);
  return ds;
}

int Dataset::drug_index(const std::string& id) const {
  auto it = drug_index_.find(id);
  return it == drug_index_.end() ? -1 : it->second;
}

int Dataset::cell_index(const std::string& id) const {
  auto it = cell_index_.find(id);
  return it == cell_index_.end() ? -1 : it->second;
}

int Dataset::checked_drug(const std::string& id) const {
  int i = drug_index(id);
  if (i < 0) throw Error("UnknownDrugId", "drug '" + id + "'");
  return i;
}

int Dataset::checked_cell(const std::string& id) const {
  int i = cell_index(id);
  if (i < 0) throw Error("UnknownCellId", "cell '" + id + "'");
  return i;
}

}  // namespace pacc::data
