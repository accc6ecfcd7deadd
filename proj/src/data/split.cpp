#include "pacc/data/split.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "pacc/rng.hpp"

namespace pacc::data {

namespace {

std::vector<std::string> shuffled(std::vector<std::string> v, RngStream rng) {
  rng.shuffle(v);
  return v;
}

void write_pairs(std::ostringstream& out, const char* tag, const std::vector<PairKey>& pairs) {
  out << tag << " " << pairs.size() << "\n";
  for (const auto& [d, c] : pairs) out << d << "\t" << c << "\n";
}

void write_ids(std::ostringstream& out, const char* tag, const std::vector<std::string>& ids) {
  out << tag;
  for (const auto& id : ids) out << "\t" << id;
  out << "\n";
}

}  // namespace

std::string protocol_name(Protocol p) {
  return p == Protocol::kStrict ? "strict" : "lenient";
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "strict") return Protocol::kStrict;
  if (name == "lenient") return Protocol::kLenient;
  throw Error("UnknownProtocol", "'" + name + "' is not strict|lenient");
}

SplitPlan strict_split(const std::vector<std::string>& drug_ids,
                       const std::vector<std::string>& cell_ids,
                       const std::vector<PairSample>& pairs, uint64_t seed, int n_folds) {
  const int n_drugs = static_cast<int>(drug_ids.size());
  const int n_cells = static_cast<int>(cell_ids.size());
  const int test_drugs = static_cast<int>(kTestFraction * n_drugs);
  const int test_cells = static_cast<int>(kTestFraction * n_cells);
  const int pool_drugs = n_drugs - test_drugs;
  const int pool_cells = n_cells - test_cells;
  const int val_drugs = static_cast<int>(kValidationFraction * pool_drugs);
  const int val_cells = static_cast<int>(kValidationFraction * pool_cells);
  if (test_drugs < 1 || test_cells < 1 || val_drugs < 1 || val_cells < 1)
    throw Error("TooFewEntities",
                "strict split quotas collapse to zero: " + std::to_string(n_drugs) +
                    " drugs / " + std::to_string(n_cells) + " cells");

  RngStream rng(seed);
  SplitPlan plan;
  plan.protocol = Protocol::kStrict;
  plan.seed = seed;

  auto drugs = shuffled(drug_ids, rng.fork(1));
  auto cells = shuffled(cell_ids, rng.fork(2));
  plan.test_drugs.assign(drugs.begin(), drugs.begin() + test_drugs);
  plan.test_cells.assign(cells.begin(), cells.begin() + test_cells);
  std::vector<std::string> drug_pool(drugs.begin() + test_drugs, drugs.end());
  std::vector<std::string> cell_pool(cells.begin() + test_cells, cells.end());
  std::sort(plan.test_drugs.begin(), plan.test_drugs.end());
  std::sort(plan.test_cells.begin(), plan.test_cells.end());

  std::set<std::string> test_drug_set(plan.test_drugs.begin(), plan.test_drugs.end());
  std::set<std::string> test_cell_set(plan.test_cells.begin(), plan.test_cells.end());
  for (const PairSample& p : pairs)
    if (test_drug_set.count(p.drug_id) && test_cell_set.count(p.cell_id))
      plan.test.emplace_back(p.drug_id, p.cell_id);

  for (int f = 0; f < n_folds; ++f) {
    SplitPlan::Fold fold;
    auto dpool = shuffled(drug_pool, rng.fork(100 + static_cast<uint64_t>(f)));
    auto cpool = shuffled(cell_pool, rng.fork(200 + static_cast<uint64_t>(f)));
    fold.val_drugs.assign(dpool.begin(), dpool.begin() + val_drugs);
    fold.val_cells.assign(cpool.begin(), cpool.begin() + val_cells);
    std::sort(fold.val_drugs.begin(), fold.val_drugs.end());
    std::sort(fold.val_cells.begin(), fold.val_cells.end());

    std::set<std::string> vd(fold.val_drugs.begin(), fold.val_drugs.end());
    std::set<std::string> vc(fold.val_cells.begin(), fold.val_cells.end());
    for (const PairSample& p : pairs) {
      const bool drug_test = test_drug_set.count(p.drug_id) > 0;
      const bool cell_test = test_cell_set.count(p.cell_id) > 0;
      if (drug_test || cell_test) continue;  // entity touches the test block
      const bool drug_val = vd.count(p.drug_id) > 0;
      const bool cell_val = vc.count(p.cell_id) > 0;
      if (drug_val && cell_val)
        fold.validation.emplace_back(p.drug_id, p.cell_id);
      else if (!drug_val && !cell_val)
        fold.train.emplace_back(p.drug_id, p.cell_id);
      // Cross pairs (validation drug x train cell and vice versa) are
      // discarded: they belong to neither set.
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

SplitPlan lenient_split(const std::vector<PairSample>& pairs, uint64_t seed, int n_folds) {
  const int n = static_cast<int>(pairs.size());
  if (n < 10) throw Error("TooFewPairs", "lenient split needs >= 10 pairs");
  const int n_test = static_cast<int>(kTestFraction * n);

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  RngStream rng(seed);
  rng.shuffle(order);

  SplitPlan plan;
  plan.protocol = Protocol::kLenient;
  plan.seed = seed;
  for (int i = 0; i < n_test; ++i)
    plan.test.emplace_back(pairs[order[i]].drug_id, pairs[order[i]].cell_id);

  std::vector<int> rest(order.begin() + n_test, order.end());
  const int m = static_cast<int>(rest.size());
  const int base = m / n_folds;
  const int extra = m % n_folds;
  int cursor = 0;
  std::vector<std::vector<int>> fold_members(n_folds);
  for (int f = 0; f < n_folds; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    fold_members[f].assign(rest.begin() + cursor, rest.begin() + cursor + size);
    cursor += size;
  }
  for (int f = 0; f < n_folds; ++f) {
    SplitPlan::Fold fold;
    for (int g = 0; g < n_folds; ++g)
      for (int idx : fold_members[g]) {
        auto key = std::make_pair(pairs[idx].drug_id, pairs[idx].cell_id);
        (g == f ? fold.validation : fold.train).push_back(std::move(key));
      }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::string SplitPlan::serialize() const {
  std::ostringstream out;
  out << "paccsplit 1\n";
  out << "protocol " << protocol_name(protocol) << "\n";
  out << "seed " << seed << "\n";
  if (protocol == Protocol::kStrict) {
    write_ids(out, "test_drugs", test_drugs);
    write_ids(out, "test_cells", test_cells);
  }
  write_pairs(out, "test_pairs", test);
  for (size_t f = 0; f < folds.size(); ++f) {
    out << "fold " << f << "\n";
    if (protocol == Protocol::kStrict) {
      write_ids(out, "val_drugs", folds[f].val_drugs);
      write_ids(out, "val_cells", folds[f].val_cells);
    }
    write_pairs(out, "train_pairs", folds[f].train);
    write_pairs(out, "val_pairs", folds[f].validation);
  }
  out << "end\n";
  return out.str();
}

SplitPlan SplitPlan::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw Error("MalformedSplitPlan", "unexpected end of plan");
    return line;
  };
  if (next_line() != "paccsplit 1")
    throw Error("MalformedSplitPlan", "unknown split plan version");

  SplitPlan plan;
  auto read_tagged = [&](const std::string& expected) {
    next_line();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != expected)
      throw Error("MalformedSplitPlan", "expected '" + expected + "', got '" + tag + "'");
    return std::string(line.substr(std::min(line.size(), tag.size() + 1)));
  };

  plan.protocol = protocol_from_name(read_tagged("protocol"));
  plan.seed = std::stoull(read_tagged("seed"));

  auto parse_ids = [](const std::string& rest) {
    std::vector<std::string> out;
    std::istringstream ss(rest);
    std::string id;
    while (std::getline(ss, id, '\t'))
      if (!id.empty()) out.push_back(id);
    return out;
  };
  auto read_pairs = [&](const std::string& expected) {
    const int n = std::stoi(read_tagged(expected));
    std::vector<PairKey> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
      next_line();
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error("MalformedSplitPlan", "expected drug<TAB>cell, got: " + line);
      out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
  };

  if (plan.protocol == Protocol::kStrict) {
    plan.test_drugs = parse_ids(read_tagged("test_drugs"));
    plan.test_cells = parse_ids(read_tagged("test_cells"));
  }
  plan.test = read_pairs("test_pairs");
  while (true) {
    next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string tag;
    int fold_no = -1;
    ls >> tag >> fold_no;
    if (tag != "fold") throw Error("MalformedSplitPlan", "expected fold header, got: " + line);
    SplitPlan::Fold fold;
    if (plan.protocol == Protocol::kStrict) {
      fold.val_drugs = parse_ids(read_tagged("val_drugs"));
      fold.val_cells = parse_ids(read_tagged("val_cells"));
    }
    fold.train = read_pairs("train_pairs");
    fold.validation = read_pairs("val_pairs");
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace pacc::data
