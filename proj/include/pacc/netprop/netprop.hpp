#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pacc/error.hpp"

namespace pacc::netprop {

// Weighted protein-protein interaction network. Adjacency is symmetric with
// a zero diagonal; node order is first-appearance order in the edge list.
struct PpiNetwork {
  std::vector<std::string> genes;
  std::unordered_map<std::string, int> index;
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<double> degree;  // weighted degree

  int node_count() const { return static_cast<int>(genes.size()); }
  int find(const std::string& gene) const {
    auto it = index.find(gene);
    return it == index.end() ? -1 : it->second;
  }
};

struct Edge {
  std::string a, b;
  double weight = 1.0;
};

// Symmetrically normalized adjacency A' = D^-1/2 A D^-1/2; rows of isolated
// nodes are zero.
struct NormalizedAdjacency {
  std::vector<std::vector<std::pair<int, double>>> rows;
};

using WeightVector = std::vector<double>;

struct PropagationResult {
  WeightVector weights;
  int iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
};

struct GenePanel {
  std::vector<std::string> genes;  // sorted union, deduplicated
  std::map<std::string, std::vector<std::string>> per_drug_topk;
  std::vector<std::string> skipped_drugs;  // no in-network targets
};

constexpr double kDefaultAlpha = 0.7;
constexpr double kDefaultTolerance = 1e-6;
constexpr double kDefaultTargetWeight = 1.0;
constexpr double kDefaultBackground = 1e-5;
constexpr int kDefaultTopK = 20;
constexpr int kDefaultMaxIter = 10000;

// Builds the network from undirected edges. Duplicate edges keep the maximum
// weight; self-loops and negative weights are rejected.
PpiNetwork build_network(const std::vector<Edge>& edges);

// Parses a TSV edge list `gene_a<TAB>gene_b<TAB>weight`. Reports the line
// number on malformed rows.
PpiNetwork load_ppi(const std::string& path);
PpiNetwork load_ppi_lines(const std::vector<std::string>& lines);

NormalizedAdjacency normalize_adjacency(const PpiNetwork& net);

// Targets get `target_weight`, everything else `background`. Target genes
// missing from the network are counted in *skipped (when non-null).
WeightVector initial_weights(const PpiNetwork& net, const std::set<std::string>& targets,
                             double target_weight = kDefaultTargetWeight,
                             double background = kDefaultBackground, int* skipped = nullptr);

// Iterates w(t+1) = alpha * w(t) A' + (1 - alpha) * w0 until the max-norm
// residual drops below tol. Never throws on non-convergence; the flag says.
PropagationResult propagate(const PpiNetwork& net, const WeightVector& w0,
                            double alpha = kDefaultAlpha, double tol = kDefaultTolerance,
                            int max_iter = kDefaultMaxIter);

// Direct dense solve of the fixed point w (I - alpha A') = (1 - alpha) w0.
// Verification oracle for propagate; requires alpha < 1.
WeightVector solve_fixed_point(const PpiNetwork& net, const WeightVector& w0,
                               double alpha = kDefaultAlpha);

// k largest weights; ties broken by lexicographic gene id.
std::vector<std::string> top_k_genes(const PpiNetwork& net, const WeightVector& w, int k);

// Per-drug propagate + top-k; the panel is the sorted union. Drugs whose
// targets are all absent from the network are skipped and reported.
GenePanel build_panel(const PpiNetwork& net,
                      const std::map<std::string, std::set<std::string>>& target_map,
                      double alpha = kDefaultAlpha, int k = kDefaultTopK,
                      int threads = 1);

}  // namespace pacc::netprop
