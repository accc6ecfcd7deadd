#pragma once

#include <set>
#include <string>
#include <vector>

#include "pacc/data/tables.hpp"

namespace pacc::analysis {

struct EnrichmentResult {
  std::string set_id;
  int overlap = 0;        // attended genes inside the set
  int set_size = 0;       // set intersected with the universe
  int attended_size = 0;
  int universe_size = 0;
  double p_raw = 1.0;       // hypergeometric upper tail P(X >= overlap)
  double p_adjusted = 1.0;  // Benjamini-Hochberg across all sets
};

// Upper-tail hypergeometric probability of drawing >= k marked elements in n
// draws from a universe of size total containing marked of them. Exact
// integer arithmetic for small universes, log-space otherwise.
double hypergeometric_upper_tail(int k, int marked, int n, int total);

// Benjamini-Hochberg step-up adjustment; preserves input order.
std::vector<double> benjamini_hochberg(const std::vector<double>& p);

// Local over-representation analysis: each gene set is intersected with the
// universe, p-values come from the hypergeometric upper tail, and results
// are sorted by adjusted p (ties by set id).
std::vector<EnrichmentResult> ora_enrichment(const std::set<std::string>& attended,
                                             const std::vector<data::GeneSet>& sets,
                                             const std::set<std::string>& universe);

}  // namespace pacc::analysis
