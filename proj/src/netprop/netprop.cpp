#include "pacc/netprop/netprop.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace pacc::netprop {

namespace {

int intern(PpiNetwork& net, const std::string& gene) {
  auto it = net.index.find(gene);
  if (it != net.index.end()) return it->second;
  int id = static_cast<int>(net.genes.size());
  net.genes.push_back(gene);
  net.index.emplace(gene, id);
  net.adj.emplace_back();
  return id;
}

}  // namespace

PpiNetwork build_network(const std::vector<Edge>& edges) {
  PpiNetwork net;
  std::map<std::pair<int, int>, double> best;
  for (size_t r = 0; r < edges.size(); ++r) {
    const Edge& e = edges[r];
    if (e.weight < 0)
      throw Error("NegativeWeight", "row " + std::to_string(r + 1) + ": weight " +
                                        std::to_string(e.weight));
    if (e.a == e.b)
      throw Error("SelfLoop", "row " + std::to_string(r + 1) + ": self-loop on '" + e.a + "'");
    int a = intern(net, e.a);
    int b = intern(net, e.b);
    auto key = std::minmax(a, b);
    auto it = best.find(key);
    if (it == best.end())
      best.emplace(key, e.weight);
    else
      it->second = std::max(it->second, e.weight);
  }
  net.degree.assign(net.genes.size(), 0.0);
  for (const auto& [key, w] : best) {
    net.adj[key.first].emplace_back(key.second, w);
    net.adj[key.second].emplace_back(key.first, w);
    net.degree[key.first] += w;
    net.degree[key.second] += w;
  }
  for (auto& row : net.adj) std::sort(row.begin(), row.end());
  return net;
}

PpiNetwork load_ppi_lines(const std::vector<std::string>& lines) {
  std::vector<Edge> edges;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (ln == 0 && cols.size() >= 3 && cols[0] == "gene_a") continue;  // header
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty())
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) + ": expected "
                                  "gene_a<TAB>gene_b<TAB>weight");
    Edge e;
    e.a = cols[0];
    e.b = cols[1];
    try {
      size_t used = 0;
      e.weight = std::stod(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("MalformedRow", "line " + std::to_string(ln + 1) + ": bad weight '" +
                                      cols[2] + "'");
    }
    if (e.weight < 0)
      throw Error("NegativeWeight", "line " + std::to_string(ln + 1) + ": weight " + cols[2]);
    if (e.a == e.b)
      throw Error("SelfLoop", "line " + std::to_string(ln + 1) + ": self-loop on '" + e.a + "'");
    edges.push_back(std::move(e));
  }
  return build_network(edges);
}

PpiNetwork load_ppi(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("FileNotFound", "cannot open edge list '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return load_ppi_lines(lines);
}

NormalizedAdjacency normalize_adjacency(const PpiNetwork& net) {
  NormalizedAdjacency norm;
  norm.rows.resize(net.adj.size());
  std::vector<double> inv_sqrt(net.degree.size(), 0.0);
  for (size_t i = 0; i < net.degree.size(); ++i)
    if (net.degree[i] > 0) inv_sqrt[i] = 1.0 / std::sqrt(net.degree[i]);
  for (size_t i = 0; i < net.adj.size(); ++i) {
    norm.rows[i].reserve(net.adj[i].size());
    for (auto [j, w] : net.adj[i])
      norm.rows[i].emplace_back(j, w * inv_sqrt[i] * inv_sqrt[j]);
  }
  return norm;
}

WeightVector initial_weights(const PpiNetwork& net, const std::set<std::string>& targets,
                             double target_weight, double background, int* skipped) {
  WeightVector w(net.genes.size(), background);
  int missing = 0;
  for (const std::string& t : targets) {
    int id = net.find(t);
    if (id < 0) {
      ++missing;
      continue;
    }
    w[id] = target_weight;
  }
  if (skipped) *skipped = missing;
  return w;
}

PropagationResult propagate(const PpiNetwork& net, const WeightVector& w0, double alpha,
                            double tol, int max_iter) {
  if (w0.size() != net.genes.size())
    throw Error("ShapeMismatch", "weight vector length " + std::to_string(w0.size()) +
                                     " != node count " + std::to_string(net.genes.size()));
  if (alpha < 0.0 || alpha > 1.0)
    throw Error("InvalidAlpha", "alpha must lie in [0, 1]");
  if (tol <= 0.0) throw Error("InvalidTolerance", "tol must be positive");

  // The step-difference rule declares convergence, but an iterate whose
  // residual just crossed tol is still ~ alpha/(1-alpha) * tol away from
  // the fixed point. After the rule fires the loop therefore polishes until
  // the rigorous error bound residual * alpha/(1-alpha) drops below
  // tol/100, so the returned weights are within tol/100 of the exact
  // solution for any graph (the normalized adjacency has spectral radius
  // <= 1).
  const double polish_target =
      alpha > 0.0 && alpha < 1.0 ? tol * 0.01 * (1.0 - alpha) / alpha : 0.0;

  NormalizedAdjacency norm = normalize_adjacency(net);
  const size_t n = w0.size();
  PropagationResult res;
  WeightVector cur = w0;
  WeightVector next(n, 0.0);
  bool rule_fired = false;
  for (int it = 1; it <= max_iter; ++it) {
    double residual = 0.0;
    for (size_t j = 0; j < n; ++j) {
      // A' is symmetric, so (w A')_j is row j of A' dotted with w.
      double acc = 0.0;
      for (auto [i, a] : norm.rows[j]) acc += cur[i] * a;
      next[j] = alpha * acc + (1.0 - alpha) * w0[j];
      residual = std::max(residual, std::abs(next[j] - cur[j]));
    }
    std::swap(cur, next);
    res.iterations = it;
    res.final_residual = residual;
    if (residual < tol) rule_fired = true;
    if (rule_fired && (alpha >= 1.0 || residual <= polish_target)) break;
  }
  res.converged = res.final_residual < tol;
  res.weights = std::move(cur);
  return res;
}

WeightVector solve_fixed_point(const PpiNetwork& net, const WeightVector& w0, double alpha) {
  if (w0.size() != net.genes.size())
    throw Error("ShapeMismatch", "weight vector length mismatch");
  if (alpha >= 1.0)
    throw Error("SingularSystem", "fixed-point system is singular at alpha = 1");
  const int n = static_cast<int>(w0.size());
  NormalizedAdjacency norm = normalize_adjacency(net);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (auto [j, a] : norm.rows[i]) m(i, j) -= alpha * a;
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = (1.0 - alpha) * w0[i];
  // I - alpha A' is symmetric positive definite for alpha < 1.
  Eigen::VectorXd x = m.ldlt().solve(rhs);
  return WeightVector(x.data(), x.data() + n);
}

std::vector<std::string> top_k_genes(const PpiNetwork& net, const WeightVector& w, int k) {
  if (k < 1) throw Error("InvalidK", "k must be >= 1");
  if (k > static_cast<int>(w.size()))
    throw Error("KTooLarge", "k = " + std::to_string(k) + " exceeds node count " +
                                 std::to_string(w.size()));
  std::vector<int> idx(w.size());
  for (size_t i = 0; i < w.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (w[a] != w[b]) return w[a] > w[b];
    return net.genes[a] < net.genes[b];
  });
  std::vector<std::string> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(net.genes[idx[i]]);
  return out;
}

GenePanel build_panel(const PpiNetwork& net,
                      const std::map<std::string, std::set<std::string>>& target_map,
                      double alpha, int k, int threads) {
  std::vector<std::string> drugs;
  for (const auto& [drug, targets] : target_map) {
    if (targets.empty())
      throw Error("EmptyTargetSet", "drug '" + drug + "' has no targets");
    drugs.push_back(drug);
  }

  std::vector<std::vector<std::string>> results(drugs.size());
  std::vector<char> skipped(drugs.size(), 0);

  auto work = [&](size_t d) {
    const auto& targets = target_map.at(drugs[d]);
    int missing = 0;
    WeightVector w0 = initial_weights(net, targets, kDefaultTargetWeight, kDefaultBackground,
                                      &missing);
    if (missing == static_cast<int>(targets.size())) {
      skipped[d] = 1;
      return;
    }
    PropagationResult res = propagate(net, w0, alpha);
    results[d] = top_k_genes(net, res.weights, k);
  };

  if (threads <= 1) {
    for (size_t d = 0; d < drugs.size(); ++d) work(d);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> cursor{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&]() {
        for (size_t d = cursor.fetch_add(1); d < drugs.size(); d = cursor.fetch_add(1)) work(d);
      });
    for (auto& t : pool) t.join();
  }

  GenePanel panel;
  std::set<std::string> uni;
  for (size_t d = 0; d < drugs.size(); ++d) {
    if (skipped[d]) {
      panel.skipped_drugs.push_back(drugs[d]);
      continue;
    }
    panel.per_drug_topk[drugs[d]] = results[d];
    uni.insert(results[d].begin(), results[d].end());
  }
  panel.genes.assign(uni.begin(), uni.end());
  return panel;
}

}  // namespace pacc::netprop
