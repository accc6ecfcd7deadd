#include "pacc/analysis/ora.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace pacc::analysis {

namespace {

// Exact binomial coefficient; safe for total <= 60 (fits uint64).
uint64_t binomial_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<uint64_t>(n - k + i) / static_cast<uint64_t>(i);
  }
  return r;
}

double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double hypergeometric_upper_tail(int k, int marked, int n, int total) {
  if (total <= 0) throw Error("EmptyUniverse", "hypergeometric over an empty universe");
  if (marked < 0 || marked > total || n < 0 || n > total)
    throw Error("InvalidArguments", "hypergeometric parameters out of range");
  if (k <= 0) return 1.0;  // P(X >= 0) and below
  const int hi = std::min(marked, n);
  if (k > hi) return 0.0;

  if (total <= 60) {
    // Exact integer path: every term and the running sum stay below 2^63.
    uint64_t numer = 0;
    for (int i = k; i <= hi; ++i)
      numer += binomial_u64(marked, i) * binomial_u64(total - marked, n - i);
    return static_cast<double>(numer) / static_cast<double>(binomial_u64(total, n));
  }

  // Log-space with stable summation for large universes.
  const double log_total = log_binomial(total, n);
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs;
  for (int i = k; i <= hi; ++i) {
    if (n - i > total - marked) continue;
    const double lg = log_binomial(marked, i) + log_binomial(total - marked, n - i) - log_total;
    logs.push_back(lg);
    max_log = std::max(max_log, lg);
  }
  if (logs.empty()) return 0.0;
  double acc = 0.0;
  for (double lg : logs) acc += std::exp(lg - max_log);
  return std::min(1.0, std::exp(max_log) * acc);
}

std::vector<double> benjamini_hochberg(const std::vector<double>& p) {
  const int m = static_cast<int>(p.size());
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });

  std::vector<double> adjusted(m, 1.0);
  double running = 1.0;
  for (int rank = m; rank >= 1; --rank) {
    const int idx = order[rank - 1];
    running = std::min(running, p[idx] * m / rank);
    adjusted[idx] = std::min(1.0, running);
  }
  return adjusted;
}

std::vector<EnrichmentResult> ora_enrichment(const std::set<std::string>& attended,
                                             const std::vector<data::GeneSet>& sets,
                                             const std::set<std::string>& universe) {
  if (universe.empty()) throw Error("EmptyUniverse", "ORA requires a non-empty universe");
  for (const std::string& g : attended)
    if (!universe.count(g))
      throw Error("AttendedOutsideUniverse", "attended gene '" + g + "' not in the universe");

  const int total = static_cast<int>(universe.size());
  const int n = static_cast<int>(attended.size());

  std::vector<EnrichmentResult> results;
  std::vector<double> raw;
  for (const auto& gs : sets) {
    EnrichmentResult r;
    r.set_id = gs.id;
    r.universe_size = total;
    r.attended_size = n;
    int marked = 0, overlap = 0;
    std::set<std::string> members(gs.genes.begin(), gs.genes.end());
    for (const std::string& g : members) {
      if (!universe.count(g)) continue;
      ++marked;
      if (attended.count(g)) ++overlap;
    }
    r.set_size = marked;
    r.overlap = overlap;
    r.p_raw = hypergeometric_upper_tail(overlap, marked, n, total);
    raw.push_back(r.p_raw);
    results.push_back(std::move(r));
  }

  std::vector<double> adjusted = benjamini_hochberg(raw);
  for (size_t i = 0; i < results.size(); ++i) results[i].p_adjusted = adjusted[i];
  std::sort(results.begin(), results.end(), [](const EnrichmentResult& a,
                                               const EnrichmentResult& b) {
    if (a.p_adjusted != b.p_adjusted) return a.p_adjusted < b.p_adjusted;
    if (a.p_raw != b.p_raw) return a.p_raw < b.p_raw;
    return a.set_id < b.set_id;
  });
  return results;
}

}  // namespace pacc::analysis
