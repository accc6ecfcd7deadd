#include "pacc/cli/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pacc/analysis/attention.hpp"
#include "pacc/analysis/ora.hpp"
#include "pacc/chem/fingerprint.hpp"
#include "pacc/chem/mol.hpp"
#include "pacc/chem/token.hpp"
#include "pacc/data/split.hpp"
#include "pacc/netprop/netprop.hpp"
#include "pacc/serve/server.hpp"
#include "pacc/train/checkpoint.hpp"
#include "pacc/train/predict.hpp"
#include "pacc/train/trainer.hpp"
#include "pacc/version.hpp"

namespace fs = std::filesystem;

namespace pacc::cli {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Accumulates the effective configuration of a run; written to
// <out>/manifest.txt so the run can be reproduced byte-for-byte.
class RunManifest {
 public:
  RunManifest(std::string subcommand, uint64_t seed)
      : subcommand_(std::move(subcommand)), seed_(seed) {}

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set(const std::string& key, int value) { entries_[key] = std::to_string(value); }
  void set(const std::string& key, int64_t value) { entries_[key] = std::to_string(value); }
  void set(const std::string& key, double value) { entries_[key] = fmt_double(value); }

  std::string config_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  void write(const fs::path& out_dir) const {
    const std::string config = config_text();
    std::ofstream f(out_dir / "manifest.txt");
    if (!f) throw Error("FileWriteFailed", "cannot write manifest");
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(
                      train::fnv1a_bytes(config.data(), config.size())));
    f << "pacc_manifest 1\n"
      << "tool_version " << kVersion << "\n"
      << "subcommand " << subcommand_ << "\n"
      << "seed " << seed_ << "\n"
      << "threads " << thread_cap() << "\n"
      << "config_hash " << hash << "\n"
      << "config_begin\n"
      << config << "config_end\n";
  }

 private:
  std::string subcommand_;
  uint64_t seed_ = 0;
  std::map<std::string, std::string> entries_;
};

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("FileWriteFailed", "cannot write '" + path.string() + "'");
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::map<std::string, std::set<std::string>> targets_or_throw(const std::string& path) {
  auto targets = data::load_targets_tsv(path);
  if (targets.empty()) throw Error("EmptyTargets", "no target rows in '" + path + "'");
  return targets;
}

// Pairs file: either drug<TAB>cell or a full responses TSV (label ignored).
std::vector<data::PairKey> load_pairs_file(const std::string& path) {
  std::vector<data::PairKey> out;
  auto lines = data::read_lines(path);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = data::split_tsv(lines[ln]);
    if (ln == 0 && !cols.empty() && cols[0] == "drug_id") continue;
    if (cols.size() != 2 && cols.size() != 3)
      throw Error("MalformedRow",
                  "line " + std::to_string(ln + 1) + ": expected drug_id<TAB>cell_id");
    out.emplace_back(cols[0], cols[1]);
  }
  return out;
}

std::vector<std::string> panel_from_file(const std::string& path) {
  std::vector<std::string> panel;
  for (const auto& line : data::read_lines(path))
    if (!line.empty()) panel.push_back(line);
  if (panel.empty()) throw Error("EmptyPanel", "no genes in '" + path + "'");
  return panel;
}

// Shared flags for commands that rebuild the modeling dataset. Augmentation
// settings must match the training run so the vocabulary agrees with the
// checkpoint.
struct DatasetArgs {
  std::string expression, smiles, responses;
  int augment_n = 32;
  uint64_t augment_seed = 0;

  void attach(CLI::App* cmd, bool need_responses) {
    cmd->add_option("--expression", expression, "Expression TSV (cell_id + gene columns)")
        ->required();
    cmd->add_option("--smiles", smiles, "SMILES TSV (drug_id<TAB>smiles)")->required();
    auto* r = cmd->add_option("--responses", responses,
                              "Responses TSV (drug_id<TAB>cell_id<TAB>log_ic50)");
    if (need_responses) r->required();
    cmd->add_option("--augment-n", augment_n, "Stored SMILES variants per drug")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--augment-seed", augment_seed, "Augmentation sampling seed");
  }

  data::Dataset build(const std::vector<std::string>& panel) const {
    auto smiles_table = data::load_smiles_tsv(smiles);
    auto expr = data::load_expression_tsv(expression);
    std::vector<data::ResponseRow> resp;
    if (!responses.empty()) resp = data::load_responses_tsv(responses);
    return data::Dataset::build(smiles_table, expr, resp, panel, augment_n, augment_seed);
  }

  void record(RunManifest& man) const {
    man.set("expression", expression);
    man.set("smiles", smiles);
    if (!responses.empty()) man.set("responses", responses);
    man.set("augment_n", augment_n);
    man.set("augment_seed", static_cast<int64_t>(augment_seed));
  }
};

// Flat key = value config file; command-line flags take precedence.
std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
  std::vector<std::string> expanded;
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      ++i;
      continue;
    }
    expanded.push_back(args[i]);
  }
  if (config_path.empty()) return expanded;

  // Explicit flags win: config entries whose flag already appears on the
  // command line are dropped.
  std::set<std::string> explicit_flags;
  for (const auto& a : expanded)
    if (a.rfind("--", 0) == 0) explicit_flags.insert(a);

  std::vector<std::string> from_file;
  for (const auto& line : data::read_lines(config_path)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("MalformedConfig", "config line without '=': " + line);
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t");
      const size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string flag = "--" + trim(line.substr(0, eq));
    if (explicit_flags.count(flag)) continue;
    from_file.push_back(flag);
    from_file.push_back(trim(line.substr(eq + 1)));
  }
  std::vector<std::string> merged;
  if (!expanded.empty()) merged.push_back(expanded[0]);
  merged.insert(merged.end(), from_file.begin(), from_file.end());
  merged.insert(merged.end(), expanded.begin() + (expanded.empty() ? 0 : 1), expanded.end());
  return merged;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_propagate(const std::string& ppi, const std::string& targets_path, double alpha,
                  double tol, int k, int max_iter, uint64_t seed, const std::string& out) {
  auto net = netprop::load_ppi(ppi);
  auto targets = targets_or_throw(targets_path);

  // Per-drug convergence diagnostics alongside the panel.
  netprop::GenePanel panel = netprop::build_panel(net, targets, alpha, k, thread_cap());
  std::string topk_tsv;
  for (const auto& [drug, genes] : panel.per_drug_topk) {
    topk_tsv += drug;
    for (const auto& g : genes) topk_tsv += "\t" + g;
    topk_tsv += "\n";
  }
  std::string panel_txt;
  for (const auto& g : panel.genes) panel_txt += g + "\n";
  std::string skipped_txt;
  for (const auto& d : panel.skipped_drugs) skipped_txt += d + "\n";

  auto dir = prepare_out_dir(out);
  RunManifest man("propagate", seed);
  man.set("ppi", ppi);
  man.set("targets", targets_path);
  man.set("alpha", alpha);
  man.set("tol", tol);
  man.set("k", k);
  man.set("max_iter", max_iter);
  man.write(dir);
  write_file(dir / "panel.txt", panel_txt);
  write_file(dir / "per_drug_topk.tsv", topk_tsv);
  write_file(dir / "skipped_drugs.txt", skipped_txt);
  std::cout << "panel of " << panel.genes.size() << " genes from "
            << panel.per_drug_topk.size() << " drugs ("
            << panel.skipped_drugs.size() << " skipped)\n";
  return 0;
}

int run_tokenize(const std::string& smiles, uint64_t seed, const std::string& out) {
  auto table = data::load_smiles_tsv(smiles);
  std::string tokens_tsv;
  std::vector<std::string> corpus;
  for (const auto& [drug, smi] : table.rows) {
    chem::TokenSequence t = chem::tokenize(smi);
    tokens_tsv += drug;
    std::string joined;
    for (const auto& tok : t.tokens) joined += (joined.empty() ? "" : " ") + tok;
    tokens_tsv += "\t" + joined + "\n";
    corpus.push_back(smi);
  }
  chem::Vocabulary vocab = chem::Vocabulary::build(corpus);
  std::string vocab_txt = "<pad>\n<unk>\n";
  for (const auto& tok : vocab.tokens()) vocab_txt += tok + "\n";

  auto dir = prepare_out_dir(out);
  RunManifest man("tokenize", seed);
  man.set("smiles", smiles);
  man.write(dir);
  write_file(dir / "tokens.tsv", tokens_tsv);
  write_file(dir / "vocab.txt", vocab_txt);
  return 0;
}

int run_augment(const std::string& smiles, int n, uint64_t seed, const std::string& out) {
  auto table = data::load_smiles_tsv(smiles);
  std::string augmented;
  RngStream rng(seed);
  for (const auto& [drug, smi] : table.rows) {
    chem::MolGraph mol = chem::parse_smiles(smi);
    const std::string canonical = chem::canonical_form(mol);
    std::vector<std::string> variants{canonical};
    RngStream sub = rng.fork(stable_hash(drug));
    for (const auto& v : chem::enumerate_smiles(mol, n, sub.next_u64())) {
      if (v == canonical || static_cast<int>(variants.size()) >= n) continue;
      variants.push_back(v);
    }
    for (const auto& v : variants) augmented += drug + "\t" + v + "\n";
  }
  auto dir = prepare_out_dir(out);
  RunManifest man("augment", seed);
  man.set("smiles", smiles);
  man.set("n", n);
  man.write(dir);
  write_file(dir / "augmented.tsv", augmented);
  return 0;
}

int run_fingerprint(const std::string& smiles, int radius, int width, uint64_t seed,
                    const std::string& out) {
  auto table = data::load_smiles_tsv(smiles);
  std::string fp_tsv;
  for (const auto& [drug, smi] : table.rows) {
    chem::Fingerprint fp = chem::morgan_fingerprint(chem::parse_smiles(smi), radius, width);
    fp_tsv += drug + "\t" + fp.to_hex() + "\n";
  }
  auto dir = prepare_out_dir(out);
  RunManifest man("fingerprint", seed);
  man.set("smiles", smiles);
  man.set("radius", radius);
  man.set("width", width);
  man.write(dir);
  write_file(dir / "fingerprints.tsv", fp_tsv);
  return 0;
}

int run_split(const std::string& protocol, const std::string& responses, uint64_t seed,
              int folds, const std::string& out) {
  auto rows = data::load_responses_tsv(responses);
  std::vector<std::string> drugs, cells;
  std::set<std::string> seen_d, seen_c;
  for (const auto& r : rows) {
    if (seen_d.insert(r.drug_id).second) drugs.push_back(r.drug_id);
    if (seen_c.insert(r.cell_id).second) cells.push_back(r.cell_id);
  }
  auto pairs = data::pair_samples(drugs, cells, rows);

  data::SplitPlan plan;
  if (data::protocol_from_name(protocol) == data::Protocol::kStrict)
    plan = data::strict_split(drugs, cells, pairs, seed,
                              folds > 0 ? folds : data::kStrictFolds);
  else
    plan = data::lenient_split(pairs, seed, folds > 0 ? folds : data::kLenientFolds);

  auto dir = prepare_out_dir(out);
  RunManifest man("split", seed);
  man.set("protocol", protocol);
  man.set("responses", responses);
  man.set("folds", static_cast<int64_t>(plan.folds.size()));
  man.write(dir);
  write_file(dir / "splitplan.txt", plan.serialize());
  std::cout << "split: " << plan.test.size() << " test pairs, " << plan.folds.size()
            << " folds\n";
  return 0;
}

struct TrainArgs {
  DatasetArgs dataset;
  std::string panel_file, targets, ppi;
  std::string protocol = "lenient";
  std::string split_file;
  std::string model = "MCA";
  int fold = 0;
  bool all_folds = false;
  bool no_augment = false;
  int64_t steps = 500000;
  int batch = 2048;
  int eval_interval = 1000;
  int keep = 20;
  double lr = 1e-3;
  double lr_decay = 0.5;
  int64_t lr_interval = 10000;
  double p_drop = -1.0;  // <0 keeps the architecture default
  uint64_t seed = 0;
  std::string out;
};

int run_train(const TrainArgs& a) {
  std::vector<std::string> panel;
  if (!a.panel_file.empty()) {
    panel = panel_from_file(a.panel_file);
  } else {
    if (a.targets.empty() || a.ppi.empty())
      throw Error("MissingInput", "train needs either --panel or --targets with --ppi");
    auto net = netprop::load_ppi(a.ppi);
    panel = netprop::build_panel(net, targets_or_throw(a.targets), netprop::kDefaultAlpha,
                                 netprop::kDefaultTopK, thread_cap())
                .genes;
  }

  data::Dataset ds = a.dataset.build(panel);

  data::SplitPlan plan;
  if (!a.split_file.empty()) {
    std::ifstream f(a.split_file);
    if (!f) throw Error("FileNotFound", "cannot open split plan '" + a.split_file + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    plan = data::SplitPlan::parse(ss.str());
  } else {
    std::vector<std::string> drugs, cells;
    for (const auto& d : ds.drugs()) drugs.push_back(d.drug_id);
    for (const auto& c : ds.cells()) cells.push_back(c.cell_id);
    if (data::protocol_from_name(a.protocol) == data::Protocol::kStrict)
      plan = data::strict_split(drugs, cells, ds.pairs(), a.seed);
    else
      plan = data::lenient_split(ds.pairs(), a.seed);
  }

  models::ModelSpec spec = models::ModelSpec::defaults_for(models::kind_from_name(a.model));
  if (a.p_drop >= 0.0) spec.p_drop = a.p_drop;
  spec = train::bind_spec(spec, ds);

  train::TrainConfig cfg;
  cfg.max_steps = a.steps;
  cfg.batch_size = a.batch;
  cfg.eval_interval = a.eval_interval;
  cfg.checkpoint_keep = a.keep;
  cfg.seed = a.seed;
  cfg.augment = !a.no_augment;
  cfg.schedule = {a.lr, a.lr_decay, a.lr_interval};

  auto dir = prepare_out_dir(a.out);
  RunManifest man("train", a.seed);
  a.dataset.record(man);
  man.set("model", a.model);
  man.set("protocol", a.protocol);
  man.set("steps", a.steps);
  man.set("batch", a.batch);
  man.set("eval_interval", a.eval_interval);
  man.set("keep", a.keep);
  man.set("augment", a.no_augment ? "off" : "on");
  man.set("lr", a.lr);
  man.set("folds", a.all_folds ? "all" : std::to_string(a.fold));
  man.write(dir);
  write_file(dir / "splitplan.txt", plan.serialize());

  if (a.all_folds) {
    train::CrossValidation cv = train::cross_validate(spec, ds, plan, cfg, thread_cap());
    std::ostringstream tsv;
    tsv << "fold\trmse\trmse_log\tpearson\tr2\tcount\n";
    for (size_t f = 0; f < cv.per_fold.size(); ++f) {
      const auto& r = cv.per_fold[f];
      tsv << f << "\t" << fmt_double(r.rmse) << "\t" << fmt_double(r.rmse_log) << "\t"
          << fmt_double(r.pearson) << "\t" << fmt_double(r.r2) << "\t" << r.count << "\n";
    }
    tsv << "median\t" << fmt_double(cv.median_rmse) << "\t" << fmt_double(cv.median_rmse_log)
        << "\t" << fmt_double(cv.median_pearson) << "\t" << fmt_double(cv.median_r2) << "\t-\n";
    tsv << "iqr\t" << fmt_double(cv.iqr_rmse) << "\t" << fmt_double(cv.iqr_rmse_log) << "\t"
        << fmt_double(cv.iqr_pearson) << "\t" << fmt_double(cv.iqr_r2) << "\t-\n";
    write_file(dir / "cv_summary.tsv", tsv.str());
    std::cout << "cross-validation median rmse " << cv.median_rmse << " (iqr " << cv.iqr_rmse
              << ") over " << cv.per_fold.size() << " folds\n";
    return 0;
  }

  if (a.fold < 0 || a.fold >= static_cast<int>(plan.folds.size()))
    throw Error("InvalidFold", "fold " + std::to_string(a.fold) + " outside plan with " +
                                   std::to_string(plan.folds.size()) + " folds");
  auto train_pairs = train::resolve_pairs(ds, plan.folds[a.fold].train);
  auto val_pairs = train::resolve_pairs(ds, plan.folds[a.fold].validation);
  auto [label_tf, expr_tf] = train::fit_fold_transforms(ds, train_pairs);
  train::TrainResult res =
      train::train(spec, ds, train_pairs, val_pairs, label_tf, expr_tf, cfg);

  std::string history = "step,train_loss,val_rmse\n";
  for (const auto& h : res.history)
    history += std::to_string(h.step) + "," + fmt_double(h.train_loss) + "," +
               fmt_double(h.val_rmse) + "\n";
  write_file(dir / ("fold" + std::to_string(a.fold) + "_history.csv"), history);
  res.best.front().save((dir / ("fold" + std::to_string(a.fold) + "_best.ckpt")).string());
  for (size_t k = 0; k < res.best.size(); ++k)
    res.best[k].save(
        (dir / ("fold" + std::to_string(a.fold) + "_top" + std::to_string(k) + ".ckpt"))
            .string());
  std::cout << "fold " << a.fold << ": best val rmse " << res.best.front().val_rmse
            << " at step " << res.best.front().step << "\n";
  return 0;
}

int run_predict(const std::string& checkpoint, const DatasetArgs& dsargs,
                const std::string& pairs_file, bool augment_average, uint64_t seed,
                const std::string& out) {
  train::Checkpoint ckpt = train::Checkpoint::load(checkpoint);
  data::Dataset ds = dsargs.build(ckpt.panel);
  std::vector<data::PairKey> pairs = load_pairs_file(pairs_file);
  std::vector<double> pred = train::predict(ckpt, ds, pairs, augment_average);

  std::string tsv = "drug_id\tcell_id\tic50_log_pred\n";
  for (size_t i = 0; i < pairs.size(); ++i)
    tsv += pairs[i].first + "\t" + pairs[i].second + "\t" + fmt_double(pred[i]) + "\n";

  auto dir = prepare_out_dir(out);
  RunManifest man("predict", seed);
  dsargs.record(man);
  man.set("checkpoint", checkpoint);
  man.set("pairs", pairs_file);
  man.set("augment_average", augment_average ? "on" : "off");
  man.write(dir);
  write_file(dir / "predictions.tsv", tsv);
  return 0;
}

int run_evaluate(const std::string& predictions, const std::string& truth,
                 const std::string& checkpoint, uint64_t seed, const std::string& out) {
  auto pred_rows = data::load_responses_tsv(predictions);  // same 3-column shape
  auto truth_rows = data::load_responses_tsv(truth);
  std::map<std::pair<std::string, std::string>, double> truth_map;
  for (const auto& r : truth_rows) truth_map[{r.drug_id, r.cell_id}] = r.log_ic50;

  std::vector<double> pred, actual;
  for (const auto& r : pred_rows) {
    auto it = truth_map.find({r.drug_id, r.cell_id});
    if (it == truth_map.end())
      throw Error("UnknownPair", "no truth for pair (" + r.drug_id + ", " + r.cell_id + ")");
    pred.push_back(r.log_ic50);
    actual.push_back(it->second);
  }

  std::ostringstream tsv;
  tsv << "metric\tvalue\n";
  tsv << "count\t" << pred.size() << "\n";
  tsv << "rmse_log\t" << fmt_double(train::rmse(pred, actual)) << "\n";
  bool defined = true;
  tsv << "pearson\t" << fmt_double(train::pearson(pred, actual, &defined)) << "\n";
  bool r2_defined = true;
  tsv << "r2\t" << fmt_double(train::r_squared(pred, actual, &r2_defined)) << "\n";
  if (!checkpoint.empty()) {
    // Normalized-scale RMSE through the checkpoint's label transform.
    train::Checkpoint ckpt = train::Checkpoint::load(checkpoint);
    std::vector<double> pn(pred.size()), tn(actual.size());
    for (size_t i = 0; i < pred.size(); ++i) {
      pn[i] = ckpt.label_tf.apply(pred[i]);
      tn[i] = ckpt.label_tf.apply(actual[i]);
    }
    tsv << "rmse_normalized\t" << fmt_double(train::rmse(pn, tn)) << "\n";
  }

  auto dir = prepare_out_dir(out);
  RunManifest man("evaluate", seed);
  man.set("predictions", predictions);
  man.set("truth", truth);
  if (!checkpoint.empty()) man.set("checkpoint", checkpoint);
  man.write(dir);
  write_file(dir / "metrics.tsv", tsv.str());
  std::cout << tsv.str();
  return 0;
}

struct AttentionArgs {
  DatasetArgs dataset;
  std::string checkpoint;
  std::string drugs_csv, cells_csv;
  std::string attended_file, genesets, universe_file;
  uint64_t seed = 0;
  std::string out;
};

std::vector<std::string> csv_or_all(const std::string& csv,
                                    const std::vector<std::string>& all) {
  if (csv.empty()) return all;
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

analysis::ProfilePanel collect_panel(const AttentionArgs& a, data::Dataset& ds_out,
                                     train::Checkpoint& ckpt_out) {
  ckpt_out = train::Checkpoint::load(a.checkpoint);
  ds_out = a.dataset.build(ckpt_out.panel);
  std::vector<std::string> all_drugs, all_cells;
  for (const auto& d : ds_out.drugs()) all_drugs.push_back(d.drug_id);
  for (const auto& c : ds_out.cells()) all_cells.push_back(c.cell_id);
  return analysis::collect_profiles(ckpt_out, ds_out, csv_or_all(a.drugs_csv, all_drugs),
                                    csv_or_all(a.cells_csv, all_cells));
}

int run_attention_profiles(const AttentionArgs& a) {
  data::Dataset ds;
  train::Checkpoint ckpt;
  analysis::ProfilePanel panel = collect_panel(a, ds, ckpt);

  std::string tsv = "drug_id\tcell_id\tkind\tposition\tlabel\tweight\n";
  for (const auto& drug : panel.drugs) {
    for (size_t c = 0; c < panel.cell_ids.size(); ++c) {
      for (size_t t = 0; t < drug.token_attention[c].size(); ++t)
        tsv += drug.drug_id + "\t" + panel.cell_ids[c] + "\ttoken\t" + std::to_string(t) +
               "\t" + drug.tokens[t] + "\t" + fmt_double(drug.token_attention[c][t]) + "\n";
      for (size_t gj = 0; gj < drug.gene_attention[c].size(); ++gj)
        tsv += drug.drug_id + "\t" + panel.cell_ids[c] + "\tgene\t" + std::to_string(gj) +
               "\t" + ckpt.panel[gj] + "\t" + fmt_double(drug.gene_attention[c][gj]) + "\n";
    }
  }
  auto dir = prepare_out_dir(a.out);
  RunManifest man("attention-profiles", a.seed);
  a.dataset.record(man);
  man.set("checkpoint", a.checkpoint);
  man.write(dir);
  write_file(dir / "profiles.tsv", tsv);
  return 0;
}

int run_attention_correlation(const AttentionArgs& a) {
  data::Dataset ds;
  train::Checkpoint ckpt;
  analysis::ProfilePanel panel = collect_panel(a, ds, ckpt);
  analysis::CorrelationResult res = analysis::attention_structure_correlation(panel, ds);

  std::string table = "drug_a\tdrug_b\tfrobenius\ttanimoto\n";
  for (const auto& row : res.table)
    table += row.drug_a + "\t" + row.drug_b + "\t" + fmt_double(row.frobenius) + "\t" +
             fmt_double(row.tanimoto) + "\n";
  std::string summary = "metric\tvalue\n";
  summary += "pearson\t" + (res.defined ? fmt_double(res.pearson) : std::string("nan")) + "\n";
  summary += "n\t" + std::to_string(res.n) + "\n";
  summary += "defined\t" + std::string(res.defined ? "yes" : "no") + "\n";

  auto dir = prepare_out_dir(a.out);
  RunManifest man("attention-correlation", a.seed);
  a.dataset.record(man);
  man.set("checkpoint", a.checkpoint);
  man.write(dir);
  write_file(dir / "correlation_pairs.tsv", table);
  write_file(dir / "correlation_summary.tsv", summary);
  std::cout << summary;
  return 0;
}

int run_attention_genes(const AttentionArgs& a) {
  data::Dataset ds;
  train::Checkpoint ckpt;
  analysis::ProfilePanel panel = collect_panel(a, ds, ckpt);
  auto kept = analysis::aggregate_gene_attention(panel, ckpt.panel);

  std::string txt;
  for (const auto& g : kept) txt += g + "\n";
  auto dir = prepare_out_dir(a.out);
  RunManifest man("attention-genes", a.seed);
  a.dataset.record(man);
  man.set("checkpoint", a.checkpoint);
  man.write(dir);
  write_file(dir / "attended_genes.txt", txt);
  std::cout << kept.size() << " of " << ckpt.panel.size() << " genes retained\n";
  return 0;
}

int run_attention_enrich(const AttentionArgs& a) {
  std::set<std::string> attended;
  for (const auto& line : data::read_lines(a.attended_file))
    if (!line.empty()) attended.insert(line);
  std::set<std::string> universe;
  for (const auto& line : data::read_lines(a.universe_file))
    if (!line.empty()) universe.insert(line);
  auto sets = data::load_gene_sets_gmt(a.genesets);

  auto results = analysis::ora_enrichment(attended, sets, universe);
  std::string tsv = "set_id\toverlap\tset_size\tattended_size\tuniverse_size\tp_raw\tp_adjusted\n";
  for (const auto& r : results)
    tsv += r.set_id + "\t" + std::to_string(r.overlap) + "\t" + std::to_string(r.set_size) +
           "\t" + std::to_string(r.attended_size) + "\t" + std::to_string(r.universe_size) +
           "\t" + fmt_double(r.p_raw) + "\t" + fmt_double(r.p_adjusted) + "\n";

  auto dir = prepare_out_dir(a.out);
  RunManifest man("attention-enrich", a.seed);
  man.set("attended", a.attended_file);
  man.set("genesets", a.genesets);
  man.set("universe", a.universe_file);
  man.write(dir);
  write_file(dir / "enrichment.tsv", tsv);
  return 0;
}

}  // namespace

int thread_cap() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("PACC_THREADS")) {
    try {
      const int parsed = std::stoi(env);
      if (parsed >= 1) cap = std::min(cap, parsed);
    } catch (const std::exception&) {
      // Unparseable values fall back to the hardware count.
    }
  }
  return cap;
}

int dispatch(const std::vector<std::string>& raw_args) {
  std::function<int()> action;

  CLI::App app{"Multimodal drug sensitivity prediction toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // propagate --------------------------------------------------------------
  auto* propagate = app.add_subcommand("propagate", "Gene panel selection by network propagation");
  struct {
    std::string ppi, targets, out = "run";
    double alpha = netprop::kDefaultAlpha, tol = netprop::kDefaultTolerance;
    int k = netprop::kDefaultTopK, max_iter = netprop::kDefaultMaxIter;
    uint64_t seed = 0;
  } prop;
  propagate->add_option("--ppi", prop.ppi, "Edge list TSV")->required();
  propagate->add_option("--targets", prop.targets, "Target map TSV")->required();
  propagate->add_option("--alpha", prop.alpha, "Diffusion parameter");
  propagate->add_option("--tol", prop.tol, "Convergence tolerance");
  propagate->add_option("--k", prop.k, "Top genes per drug");
  propagate->add_option("--max-iter", prop.max_iter, "Iteration cap");
  propagate->add_option("--seed", prop.seed, "Run seed (recorded)");
  propagate->add_option("--out", prop.out, "Output directory");
  propagate->callback([&]() {
    action = [&]() {
      return run_propagate(prop.ppi, prop.targets, prop.alpha, prop.tol, prop.k, prop.max_iter,
                           prop.seed, prop.out);
    };
  });

  // tokenize ----------------------------------------------------------------
  auto* tokenize = app.add_subcommand("tokenize", "Tokenize SMILES and emit the vocabulary");
  struct {
    std::string smiles, out = "run";
    uint64_t seed = 0;
  } tok;
  tokenize->add_option("--smiles", tok.smiles, "SMILES TSV")->required();
  tokenize->add_option("--seed", tok.seed, "Run seed (recorded)");
  tokenize->add_option("--out", tok.out, "Output directory");
  tokenize->callback([&]() {
    action = [&]() { return run_tokenize(tok.smiles, tok.seed, tok.out); };
  });

  // augment -----------------------------------------------------------------
  auto* augment = app.add_subcommand("augment", "Enumerate randomized SMILES variants");
  struct {
    std::string smiles, out = "run";
    int n = 32;
    uint64_t seed = 0;
  } aug;
  augment->add_option("--smiles", aug.smiles, "SMILES TSV")->required();
  augment->add_option("--n", aug.n, "Variants per molecule")->check(CLI::PositiveNumber);
  augment->add_option("--seed", aug.seed, "Sampling seed");
  augment->add_option("--out", aug.out, "Output directory");
  augment->callback([&]() {
    action = [&]() { return run_augment(aug.smiles, aug.n, aug.seed, aug.out); };
  });

  // fingerprint ---------------------------------------------------------------
  auto* fingerprint = app.add_subcommand("fingerprint", "Morgan fingerprints as hex bitsets");
  struct {
    std::string smiles, out = "run";
    int radius = 2, width = 512;
    uint64_t seed = 0;
  } fp;
  fingerprint->add_option("--smiles", fp.smiles, "SMILES TSV")->required();
  fingerprint->add_option("--radius", fp.radius, "Neighborhood radius");
  fingerprint->add_option("--width", fp.width, "Bitset width (power of two)");
  fingerprint->add_option("--seed", fp.seed, "Run seed (recorded)");
  fingerprint->add_option("--out", fp.out, "Output directory");
  fingerprint->callback([&]() {
    action = [&]() { return run_fingerprint(fp.smiles, fp.radius, fp.width, fp.seed, fp.out); };
  });

  // split ---------------------------------------------------------------------
  auto* split = app.add_subcommand("split", "Build a strict or lenient split plan");
  struct {
    std::string protocol, responses, out = "run";
    uint64_t seed = 0;
    int folds = 0;
  } sp;
  split->add_option("--protocol", sp.protocol, "strict|lenient")->required();
  split->add_option("--responses", sp.responses, "Responses TSV")->required();
  split->add_option("--seed", sp.seed, "Shuffle seed");
  split->add_option("--folds", sp.folds, "Fold count override");
  split->add_option("--out", sp.out, "Output directory");
  split->callback([&]() {
    action = [&]() { return run_split(sp.protocol, sp.responses, sp.seed, sp.folds, sp.out); };
  });

  // train -----------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train an encoder on one fold or all folds");
  auto targs = std::make_shared<TrainArgs>();
  targs->dataset.attach(train_cmd, true);
  train_cmd->add_option("--panel", targs->panel_file, "Panel file (one gene per line)");
  train_cmd->add_option("--targets", targs->targets, "Target map TSV (with --ppi)");
  train_cmd->add_option("--ppi", targs->ppi, "PPI edge list TSV (with --targets)");
  train_cmd->add_option("--protocol", targs->protocol, "strict|lenient");
  train_cmd->add_option("--split", targs->split_file, "Reuse an existing split plan");
  train_cmd->add_option("--model", targs->model, "DNN|bRNN|SCNN|SA|CA|MCA");
  train_cmd->add_option("--fold", targs->fold, "Fold index to train");
  train_cmd->add_flag("--all-folds", targs->all_folds, "Cross-validate every fold");
  train_cmd->add_flag("--no-augment", targs->no_augment, "Disable SMILES augmentation");
  train_cmd->add_option("--steps", targs->steps, "Max optimizer steps");
  train_cmd->add_option("--batch", targs->batch, "Batch size");
  train_cmd->add_option("--eval-interval", targs->eval_interval, "Steps between validations");
  train_cmd->add_option("--keep", targs->keep, "Best checkpoints retained");
  train_cmd->add_option("--lr", targs->lr, "Initial learning rate");
  train_cmd->add_option("--lr-decay", targs->lr_decay, "Learning-rate decay factor");
  train_cmd->add_option("--lr-interval", targs->lr_interval, "Steps between decays");
  train_cmd->add_option("--p-drop", targs->p_drop, "Dropout probability override");
  train_cmd->add_option("--seed", targs->seed, "Training seed");
  train_cmd->add_option("--out", targs->out, "Output directory")->required();
  train_cmd->callback([&, targs]() {
    action = [targs]() { return run_train(*targs); };
  });

  // predict -----------------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "Predict log-IC50 for (drug, cell) pairs");
  auto pargs = std::make_shared<DatasetArgs>();
  struct PredictExtra {
    std::string checkpoint, pairs, out = "run";
    bool augment_average = false;
    uint64_t seed = 0;
  };
  auto pextra = std::make_shared<PredictExtra>();
  pargs->attach(predict_cmd, false);
  predict_cmd->add_option("--checkpoint", pextra->checkpoint, "Trained checkpoint")->required();
  predict_cmd->add_option("--pairs", pextra->pairs, "Pairs TSV (drug_id<TAB>cell_id)")
      ->required();
  predict_cmd->add_flag("--augment-average", pextra->augment_average,
                        "Average predictions over stored SMILES variants");
  predict_cmd->add_option("--seed", pextra->seed, "Run seed (recorded)");
  predict_cmd->add_option("--out", pextra->out, "Output directory");
  predict_cmd->callback([&, pargs, pextra]() {
    action = [pargs, pextra]() {
      return run_predict(pextra->checkpoint, *pargs, pextra->pairs, pextra->augment_average,
                         pextra->seed, pextra->out);
    };
  });

  // evaluate ------------------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "Metrics for predictions against truth");
  struct {
    std::string predictions, truth, checkpoint, out = "run";
    uint64_t seed = 0;
  } ev;
  evaluate->add_option("--predictions", ev.predictions, "Predictions TSV")->required();
  evaluate->add_option("--truth", ev.truth, "Truth responses TSV")->required();
  evaluate->add_option("--checkpoint", ev.checkpoint,
                       "Optional checkpoint for normalized-scale RMSE");
  evaluate->add_option("--seed", ev.seed, "Run seed (recorded)");
  evaluate->add_option("--out", ev.out, "Output directory");
  evaluate->callback([&]() {
    action = [&]() { return run_evaluate(ev.predictions, ev.truth, ev.checkpoint, ev.seed, ev.out); };
  });

  // attention --------------------------------------------------------------------------
  auto* attention = app.add_subcommand("attention", "Attention analysis pipelines");
  attention->require_subcommand(1);
  auto aargs = std::make_shared<AttentionArgs>();
  auto add_model_inputs = [&](CLI::App* sub) {
    aargs->dataset.attach(sub, false);
    sub->add_option("--checkpoint", aargs->checkpoint, "Trained checkpoint")->required();
    sub->add_option("--drugs", aargs->drugs_csv, "Comma-separated drug ids (default: all)");
    sub->add_option("--cells", aargs->cells_csv, "Comma-separated cell ids (default: all)");
    sub->add_option("--seed", aargs->seed, "Run seed (recorded)");
    sub->add_option("--out", aargs->out, "Output directory")->required();
  };
  auto* prof = attention->add_subcommand("profiles", "Token and gene attention per pair");
  add_model_inputs(prof);
  prof->callback([&, aargs]() {
    action = [aargs]() { return run_attention_profiles(*aargs); };
  });
  auto* corr = attention->add_subcommand("correlation",
                                         "Frobenius-vs-Tanimoto structure correlation");
  add_model_inputs(corr);
  corr->callback([&, aargs]() {
    action = [aargs]() { return run_attention_correlation(*aargs); };
  });
  auto* genes = attention->add_subcommand("genes", "Aggregate and threshold gene attention");
  add_model_inputs(genes);
  genes->callback([&, aargs]() {
    action = [aargs]() { return run_attention_genes(*aargs); };
  });
  auto* enrich = attention->add_subcommand("enrich", "Over-representation analysis");
  enrich->add_option("--attended", aargs->attended_file, "Attended gene list")->required();
  enrich->add_option("--genesets", aargs->genesets, "GMT gene sets")->required();
  enrich->add_option("--universe", aargs->universe_file, "Universe gene list")->required();
  enrich->add_option("--seed", aargs->seed, "Run seed (recorded)");
  enrich->add_option("--out", aargs->out, "Output directory")->required();
  enrich->callback([&, aargs]() {
    action = [aargs]() { return run_attention_enrich(*aargs); };
  });

  // serve ---------------------------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "JSON-over-HTTP prediction service");
  struct {
    std::string checkpoint, expression, host = "127.0.0.1";
    int port = 8080;
  } sv;
  serve_cmd->add_option("--checkpoint", sv.checkpoint, "Trained checkpoint")->required();
  serve_cmd->add_option("--expression", sv.expression, "Expression TSV for cell lookups")
      ->required();
  serve_cmd->add_option("--host", sv.host, "Bind address");
  serve_cmd->add_option("--port", sv.port, "Bind port");
  serve_cmd->callback([&]() {
    action = [&]() {
      serve::ServerContext ctx =
          serve::ServerContext::load(sv.checkpoint, sv.expression);
      std::cout << "serving on " << sv.host << ":" << sv.port << "\n";
      return serve::run_server(ctx, sv.host, sv.port) ? 0 : 2;
    };
  });

  try {
    std::vector<std::string> args = apply_config_file(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0; usage errors exit 1
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (!action) return 1;
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace pacc::cli
