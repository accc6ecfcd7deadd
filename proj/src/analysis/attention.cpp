#include "pacc/analysis/attention.hpp"

#include <cmath>

#include "pacc/chem/fingerprint.hpp"
#include "pacc/train/metrics.hpp"
#include "pacc/train/predict.hpp"

namespace pacc::analysis {

ProfilePanel collect_profiles(const train::Checkpoint& ckpt, const data::Dataset& ds,
                              const std::vector<std::string>& drug_ids,
                              const std::vector<std::string>& cell_ids) {
  using models::ModelKind;
  const ModelKind kind = ckpt.spec.kind;
  if (kind != ModelKind::kSa && kind != ModelKind::kCa && kind != ModelKind::kMca)
    throw Error("ModelWithoutAttention",
                models::kind_name(kind) + " emits no token attention profiles");
  train::check_compatibility(ckpt, ds);

  models::Encoder<float> model = ckpt.instantiate();
  std::vector<std::vector<float>> cells_transformed;
  std::vector<int> cell_rows;
  for (const std::string& id : cell_ids) {
    const auto& cell = ds.cell(id);
    std::vector<double> t = ckpt.expr_tf.apply(cell.expression);
    cells_transformed.emplace_back(t.begin(), t.end());
    cell_rows.push_back(ds.cell_index(id));
  }

  ProfilePanel panel;
  panel.cell_ids = cell_ids;
  const int gdim = static_cast<int>(ds.panel().size());

  for (const std::string& drug_id : drug_ids) {
    const auto& drug = ds.drug(drug_id);
    const auto& ids = drug.variant_ids[0];  // canonical variant
    const int t_len = static_cast<int>(ids.size());
    const int batch = static_cast<int>(cell_ids.size());

    models::Batch<float> b;
    b.batch = batch;
    b.t_len = t_len;
    b.token_ids.reserve(static_cast<size_t>(batch) * t_len);
    for (int r = 0; r < batch; ++r)
      b.token_ids.insert(b.token_ids.end(), ids.begin(), ids.end());
    b.pad_mask.assign(static_cast<size_t>(batch) * t_len, 1);
    b.genes.resize(static_cast<size_t>(batch) * gdim);
    for (int r = 0; r < batch; ++r)
      std::copy(cells_transformed[r].begin(), cells_transformed[r].end(),
                b.genes.begin() + static_cast<size_t>(r) * gdim);

    nn::Graph<float> g;
    auto out = model.forward(g, b, nn::Mode::kEval);

    DrugProfile profile;
    profile.drug_id = drug_id;
    {
      chem::TokenSequence seq = chem::tokenize(drug.canonical);
      profile.tokens = seq.tokens;
    }
    profile.token_attention.assign(batch, std::vector<double>(t_len, 0.0));
    for (const auto& head : out.smiles_attention)
      for (int r = 0; r < batch; ++r)
        for (int t = 0; t < t_len; ++t)
          profile.token_attention[r][t] +=
              static_cast<double>(head->value[static_cast<size_t>(r) * t_len + t]);
    const double n_heads = static_cast<double>(out.smiles_attention.size());
    for (auto& row : profile.token_attention)
      for (double& v : row) v /= n_heads;

    profile.gene_attention.assign(batch, std::vector<double>(gdim, 0.0));
    for (int r = 0; r < batch; ++r)
      for (int j = 0; j < gdim; ++j)
        profile.gene_attention[r][j] =
            static_cast<double>(out.gene_attention->value[static_cast<size_t>(r) * gdim + j]);

    panel.drugs.push_back(std::move(profile));
  }
  return panel;
}

Matrix drug_distance_matrix(const DrugProfile& drug, ProfileKind kind) {
  const auto& profiles =
      kind == ProfileKind::kToken ? drug.token_attention : drug.gene_attention;
  const size_t cells = profiles.size();
  if (cells < 2)
    throw Error("InsufficientCells", "distance matrix needs >= 2 cells, got " +
                                         std::to_string(cells));
  for (const auto& row : profiles)
    if (row.size() != profiles[0].size())
      throw Error("ShapeMismatch", "attention profiles have unequal lengths");
  Matrix m(cells, std::vector<double>(cells, 0.0));
  for (size_t a = 0; a < cells; ++a)
    for (size_t b = a + 1; b < cells; ++b) {
      double acc = 0.0;
      for (size_t t = 0; t < profiles[a].size(); ++t) {
        const double d = profiles[a][t] - profiles[b][t];
        acc += d * d;
      }
      m[a][b] = m[b][a] = std::sqrt(acc);
    }
  return m;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size())
    throw Error("ShapeMismatch", "distance matrices have unequal sizes");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size())
      throw Error("ShapeMismatch", "distance matrices have unequal sizes");
    for (size_t j = 0; j < a[i].size(); ++j) {
      const double d = a[i][j] - b[i][j];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

CorrelationResult attention_structure_correlation(const ProfilePanel& panel,
                                                  const data::Dataset& ds) {
  if (panel.drugs.size() < 2)
    throw Error("InsufficientDrugs", "correlation needs >= 2 drugs");
  for (const auto& drug : panel.drugs)
    if (drug.token_attention.size() != panel.cell_ids.size())
      throw Error("CellSetMismatch", "drug '" + drug.drug_id +
                                         "' was profiled on a different cell set");

  std::vector<Matrix> matrices;
  matrices.reserve(panel.drugs.size());
  for (const auto& drug : panel.drugs) matrices.push_back(drug_distance_matrix(drug));

  CorrelationResult result;
  std::vector<double> xs, ys;
  for (size_t a = 0; a < panel.drugs.size(); ++a) {
    const auto& fp_a = ds.drug(panel.drugs[a].drug_id).fingerprint;
    for (size_t b = 0; b < panel.drugs.size(); ++b) {
      const auto& fp_b = ds.drug(panel.drugs[b].drug_id).fingerprint;
      CorrelationResult::Row row;
      row.drug_a = panel.drugs[a].drug_id;
      row.drug_b = panel.drugs[b].drug_id;
      row.frobenius = frobenius_distance(matrices[a], matrices[b]);
      row.tanimoto = chem::tanimoto(fp_a, fp_b);
      xs.push_back(row.frobenius);
      ys.push_back(row.tanimoto);
      result.table.push_back(std::move(row));
    }
  }
  result.n = static_cast<int>(result.table.size());
  result.pearson = train::pearson(xs, ys, &result.defined);
  return result;
}

std::vector<std::string> aggregate_gene_attention(const ProfilePanel& panel,
                                                  const std::vector<std::string>& gene_panel) {
  const size_t k = gene_panel.size();
  if (k == 0) throw Error("EmptyPanel", "gene panel is empty");
  std::vector<double> mean(k, 0.0);
  size_t count = 0;
  for (const auto& drug : panel.drugs)
    for (const auto& row : drug.gene_attention) {
      if (row.size() != k)
        throw Error("ShapeMismatch", "gene attention width disagrees with the panel");
      for (size_t j = 0; j < k; ++j) mean[j] += row[j];
      ++count;
    }
  if (count == 0) throw Error("EmptyPanel", "no profiles to aggregate");
  const double threshold = 1.0 / static_cast<double>(k);
  std::vector<std::string> kept;
  for (size_t j = 0; j < k; ++j)
    if (mean[j] / static_cast<double>(count) >= threshold) kept.push_back(gene_panel[j]);
  return kept;
}

}  // namespace pacc::analysis
