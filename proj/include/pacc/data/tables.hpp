#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pacc/error.hpp"

namespace pacc::data {

// TSV ingestion for the five input table formats. All loaders report the
// offending line number on malformed rows and reject missing values.

struct SmilesTable {
  std::vector<std::pair<std::string, std::string>> rows;  // (drug_id, smiles)
};

struct ExpressionTable {
  std::vector<std::string> genes;                   // header order
  std::vector<std::string> cells;                   // row order
  std::vector<std::vector<double>> values;          // [cell][gene]
  std::map<std::string, int> cell_index;

  int find_cell(const std::string& id) const {
    auto it = cell_index.find(id);
    return it == cell_index.end() ? -1 : it->second;
  }
};

struct ResponseRow {
  std::string drug_id;
  std::string cell_id;
  double log_ic50 = 0.0;
};

struct GeneSet {
  std::string id;
  std::string description;
  std::vector<std::string> genes;
};

std::vector<std::string> read_lines(const std::string& path);
std::vector<std::string> split_tsv(const std::string& line);

// `drug_id<TAB>smiles`, with optional header.
SmilesTable load_smiles_tsv(const std::string& path);
SmilesTable parse_smiles_tsv(const std::vector<std::string>& lines);

// First column cell_id, header row carries gene ids.
ExpressionTable load_expression_tsv(const std::string& path);
ExpressionTable parse_expression_tsv(const std::vector<std::string>& lines);

// `drug_id<TAB>cell_id<TAB>log_ic50`.
std::vector<ResponseRow> load_responses_tsv(const std::string& path);
std::vector<ResponseRow> parse_responses_tsv(const std::vector<std::string>& lines);

// `drug_id<TAB>comma-separated gene ids`.
std::map<std::string, std::set<std::string>> load_targets_tsv(const std::string& path);
std::map<std::string, std::set<std::string>> parse_targets_tsv(
    const std::vector<std::string>& lines);

// GMT-style: `set_id<TAB>description<TAB>gene...`.
std::vector<GeneSet> load_gene_sets_gmt(const std::string& path);
std::vector<GeneSet> parse_gene_sets_gmt(const std::vector<std::string>& lines);

}  // namespace pacc::data
