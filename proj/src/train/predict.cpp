#include "pacc/train/predict.hpp"

#include <algorithm>
#include <map>

#include "pacc/chem/mol.hpp"

namespace pacc::train {

void check_compatibility(const Checkpoint& ckpt, const data::Dataset& ds) {
  if (ckpt.vocab_tokens != ds.vocab().tokens())
    throw Error("VocabMismatch", "checkpoint vocabulary differs from the dataset vocabulary");
  if (ckpt.panel != ds.panel())
    throw Error("PanelMismatch", "checkpoint gene panel differs from the dataset panel");
}

namespace {

// Forward one drug variant against a list of cells; returns normalized-scale
// predictions. Sequences run unpadded at their exact length, so results are
// identical whether cells are batched together or sent one at a time.
std::vector<double> forward_variant(models::Encoder<float>& model, const data::Dataset& ds,
                                    const std::vector<std::vector<float>>& cells_transformed,
                                    const std::vector<float>& fingerprint_row, int drug_index,
                                    int variant_index, const std::vector<int>& cell_indices) {
  const auto& ids = ds.drugs()[drug_index].variant_ids[static_cast<size_t>(variant_index)];
  const int t_len = static_cast<int>(ids.size());
  const int gdim = static_cast<int>(ds.panel().size());

  models::Batch<float> batch;
  batch.batch = static_cast<int>(cell_indices.size());
  batch.t_len = t_len;
  batch.token_ids.reserve(cell_indices.size() * ids.size());
  for (size_t r = 0; r < cell_indices.size(); ++r)
    batch.token_ids.insert(batch.token_ids.end(), ids.begin(), ids.end());
  batch.pad_mask.assign(cell_indices.size() * ids.size(), 1);
  batch.genes.resize(cell_indices.size() * static_cast<size_t>(gdim));
  for (size_t r = 0; r < cell_indices.size(); ++r) {
    const auto& cell = cells_transformed[static_cast<size_t>(cell_indices[r])];
    std::copy(cell.begin(), cell.end(), batch.genes.begin() + r * gdim);
  }
  if (model.spec().kind == models::ModelKind::kDnn) {
    batch.fingerprints.resize(cell_indices.size() * fingerprint_row.size());
    for (size_t r = 0; r < cell_indices.size(); ++r)
      std::copy(fingerprint_row.begin(), fingerprint_row.end(),
                batch.fingerprints.begin() + r * fingerprint_row.size());
  }

  nn::Graph<float> g;
  auto out = model.forward(g, batch, nn::Mode::kEval);
  std::vector<double> pred(cell_indices.size());
  for (size_t r = 0; r < pred.size(); ++r)
    pred[r] = static_cast<double>(out.prediction->value[r]);
  return pred;
}

std::vector<float> fingerprint_row_of(const data::DrugRecord& drug) {
  std::vector<float> row(drug.fingerprint.width);
  for (int b = 0; b < drug.fingerprint.width; ++b)
    row[b] = drug.fingerprint.test(static_cast<uint64_t>(b)) ? 1.0f : 0.0f;
  return row;
}

std::vector<double> predict_normalized(models::Encoder<float>& model, const Checkpoint& ckpt,
                                       const data::Dataset& ds,
                                       const std::vector<data::PairKey>& pairs,
                                       bool augment_average) {
  std::vector<std::vector<float>> cells_transformed;
  cells_transformed.reserve(ds.cells().size());
  for (const auto& cell : ds.cells()) {
    std::vector<double> t = ckpt.expr_tf.apply(cell.expression);
    cells_transformed.emplace_back(t.begin(), t.end());
  }

  // Group pair positions by drug.
  std::map<int, std::vector<size_t>> by_drug;
  std::vector<int> cell_of(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    const int di = ds.drug_index(pairs[i].first);
    const int ci = ds.cell_index(pairs[i].second);
    if (di < 0) throw Error("UnknownDrugId", "drug '" + pairs[i].first + "'");
    if (ci < 0) throw Error("UnknownCellId", "cell '" + pairs[i].second + "'");
    by_drug[di].push_back(i);
    cell_of[i] = ci;
  }

  std::vector<double> out(pairs.size(), 0.0);
  for (const auto& [di, positions] : by_drug) {
    std::vector<int> cell_indices;
    cell_indices.reserve(positions.size());
    for (size_t pos : positions) cell_indices.push_back(cell_of[pos]);
    const auto& drug = ds.drugs()[static_cast<size_t>(di)];
    std::vector<float> fp_row;
    if (model.spec().kind == models::ModelKind::kDnn) fp_row = fingerprint_row_of(drug);

    const int n_variants = augment_average ? static_cast<int>(drug.variants.size()) : 1;
    std::vector<double> acc(positions.size(), 0.0);
    for (int v = 0; v < n_variants; ++v) {
      auto pred = forward_variant(model, ds, cells_transformed, fp_row, di, v, cell_indices);
      for (size_t r = 0; r < pred.size(); ++r) acc[r] += pred[r];
    }
    for (size_t r = 0; r < positions.size(); ++r)
      out[positions[r]] = acc[r] / static_cast<double>(n_variants);
  }
  return out;
}

}  // namespace

std::vector<double> predict(const Checkpoint& ckpt, const data::Dataset& ds,
                            const std::vector<data::PairKey>& pairs, bool augment_average) {
  check_compatibility(ckpt, ds);
  models::Encoder<float> model = ckpt.instantiate();
  auto norm = predict_normalized(model, ckpt, ds, pairs, augment_average);
  for (double& v : norm) v = ckpt.label_tf.invert(v);
  return norm;
}

std::vector<double> ensemble_predict(const std::vector<Checkpoint>& checkpoints,
                                     const data::Dataset& ds,
                                     const std::vector<data::PairKey>& pairs) {
  if (checkpoints.empty()) throw Error("EmptyEnsemble", "ensemble of zero checkpoints");
  for (const auto& c : checkpoints) {
    if (c.vocab_tokens != checkpoints[0].vocab_tokens)
      throw Error("VocabMismatch", "ensemble members disagree on the vocabulary");
    if (c.panel != checkpoints[0].panel)
      throw Error("PanelMismatch", "ensemble members disagree on the gene panel");
  }
  check_compatibility(checkpoints[0], ds);

  std::vector<double> mean(pairs.size(), 0.0);
  for (const auto& ckpt : checkpoints) {
    models::Encoder<float> model = ckpt.instantiate();
    auto norm = predict_normalized(model, ckpt, ds, pairs, false);
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += norm[i];
  }
  for (double& v : mean)
    v = checkpoints[0].label_tf.invert(v / static_cast<double>(checkpoints.size()));
  return mean;
}

SinglePrediction predict_single(const Checkpoint& ckpt, models::Encoder<float>& model,
                                const std::string& smiles,
                                const std::vector<double>& raw_expression) {
  SinglePrediction out;
  chem::MolGraph mol = chem::parse_smiles(smiles);  // ParseError propagates
  out.canonical = chem::canonical_form(mol);

  chem::Vocabulary vocab = chem::Vocabulary::from_tokens(ckpt.vocab_tokens);
  chem::TokenSequence seq = chem::tokenize(out.canonical);
  vocab.encode(seq);
  out.tokens = seq.tokens;

  if (raw_expression.size() != ckpt.panel.size())
    throw Error("PanelMismatch", "expression vector length " +
                                     std::to_string(raw_expression.size()) +
                                     " != panel size " + std::to_string(ckpt.panel.size()));
  std::vector<double> genes = ckpt.expr_tf.apply(raw_expression);

  models::Batch<float> batch;
  batch.batch = 1;
  batch.t_len = seq.length();
  batch.token_ids = seq.ids;
  batch.pad_mask.assign(seq.ids.size(), 1);
  batch.genes.assign(genes.begin(), genes.end());
  if (model.spec().kind == models::ModelKind::kDnn) {
    chem::Fingerprint fp = chem::morgan_fingerprint(mol, 2, model.spec().fingerprint_width);
    batch.fingerprints.resize(fp.width);
    for (int b = 0; b < fp.width; ++b)
      batch.fingerprints[b] = fp.test(static_cast<uint64_t>(b)) ? 1.0f : 0.0f;
  }

  nn::Graph<float> g;
  auto fwd = model.forward(g, batch, nn::Mode::kEval);
  out.ic50_normalized = static_cast<double>(fwd.prediction->value[0]);
  out.ic50_log = ckpt.label_tf.invert(out.ic50_normalized);

  if (fwd.gene_attention)
    out.gene_attention.assign(fwd.gene_attention->value.begin(),
                              fwd.gene_attention->value.end());
  if (!fwd.smiles_attention.empty()) {
    out.token_attention.assign(seq.ids.size(), 0.0);
    for (const auto& head : fwd.smiles_attention)
      for (size_t t = 0; t < out.token_attention.size(); ++t)
        out.token_attention[t] += static_cast<double>(head->value[t]);
    for (double& v : out.token_attention)
      v /= static_cast<double>(fwd.smiles_attention.size());
  }
  return out;
}

}  // namespace pacc::train
