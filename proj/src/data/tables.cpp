#include "pacc/data/tables.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pacc::data {

namespace {

double parse_double(const std::string& s, size_t line_no, const char* what) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("MalformedRow", "line " + std::to_string(line_no) + ": bad " + what + " '" +
                                    s + "'");
  }
}

}  // namespace

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("FileNotFound", "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_tsv(const std::string& line) {
  std::vector<std::string> cols;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

SmilesTable parse_smiles_tsv(const std::vector<std::string>& lines) {
  SmilesTable out;
  std::set<std::string> seen;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = split_tsv(lines[ln]);
    if (ln == 0 && cols.size() == 2 && cols[0] == "drug_id") continue;
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
      throw Error("MalformedRow",
                  "line " + std::to_string(ln + 1) + ": expected drug_id<TAB>smiles");
    if (!seen.insert(cols[0]).second)
      throw Error("DuplicateId", "line " + std::to_string(ln + 1) + ": drug '" + cols[0] +
                                     "' appears twice");
    out.rows.emplace_back(cols[0], cols[1]);
  }
  return out;
}

SmilesTable load_smiles_tsv(const std::string& path) {
  return parse_smiles_tsv(read_lines(path));
}

ExpressionTable parse_expression_tsv(const std::vector<std::string>& lines) {
  if (lines.empty()) throw Error("MalformedRow", "empty expression table");
  ExpressionTable out;
  auto header = split_tsv(lines[0]);
  if (header.size() < 2)
    throw Error("MalformedRow", "line 1: expression header needs cell_id plus gene columns");
  out.genes.assign(header.begin() + 1, header.end());
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = split_tsv(lines[ln]);
    if (cols.size() != header.size() || cols[0].empty())
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) + ": expected " +
                                      std::to_string(header.size()) + " columns");
    if (out.cell_index.count(cols[0]))
      throw Error("DuplicateId", "line " + std::to_string(ln + 1) + ": cell '" + cols[0] +
                                     "' appears twice");
    std::vector<double> row(out.genes.size());
    for (size_t c = 1; c < cols.size(); ++c)
      row[c - 1] = parse_double(cols[c], ln + 1, "expression value");
    out.cell_index[cols[0]] = static_cast<int>(out.cells.size());
    out.cells.push_back(cols[0]);
    out.values.push_back(std::move(row));
  }
  return out;
}

ExpressionTable load_expression_tsv(const std::string& path) {
  return parse_expression_tsv(read_lines(path));
}

std::vector<ResponseRow> parse_responses_tsv(const std::vector<std::string>& lines) {
  std::vector<ResponseRow> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = split_tsv(lines[ln]);
    if (ln == 0 && cols.size() == 3 && cols[0] == "drug_id") continue;
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty())
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) +
                                      ": expected drug_id<TAB>cell_id<TAB>log_ic50");
    ResponseRow row;
    row.drug_id = cols[0];
    row.cell_id = cols[1];
    row.log_ic50 = parse_double(cols[2], ln + 1, "log_ic50");
    if (!std::isfinite(row.log_ic50))
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) + ": non-finite label");
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<ResponseRow> load_responses_tsv(const std::string& path) {
  return parse_responses_tsv(read_lines(path));
}

std::map<std::string, std::set<std::string>> parse_targets_tsv(
    const std::vector<std::string>& lines) {
  std::map<std::string, std::set<std::string>> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = split_tsv(lines[ln]);
    if (ln == 0 && cols.size() == 2 && cols[0] == "drug_id") continue;
    if (cols.size() != 2 || cols[0].empty())
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) +
                                      ": expected drug_id<TAB>comma-separated genes");
    std::set<std::string> genes;
    std::string item;
    std::stringstream ss(cols[1]);
    while (std::getline(ss, item, ','))
      if (!item.empty()) genes.insert(item);
    out[cols[0]] = std::move(genes);
  }
  return out;
}

std::map<std::string, std::set<std::string>> load_targets_tsv(const std::string& path) {
  return parse_targets_tsv(read_lines(path));
}

std::vector<GeneSet> parse_gene_sets_gmt(const std::vector<std::string>& lines) {
  std::vector<GeneSet> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = split_tsv(lines[ln]);
    if (cols.size() < 3 || cols[0].empty())
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) +
                                      ": expected set_id<TAB>description<TAB>gene...");
    GeneSet gs;
    gs.id = cols[0];
    gs.description = cols[1];
    gs.genes.assign(cols.begin() + 2, cols.end());
    out.push_back(std::move(gs));
  }
  return out;
}

std::vector<GeneSet> load_gene_sets_gmt(const std::string& path) {
  return parse_gene_sets_gmt(read_lines(path));
}

}  // namespace pacc::data
