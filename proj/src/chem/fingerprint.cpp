#include "pacc/chem/fingerprint.hpp"

#include <algorithm>
#include <bit>

namespace pacc::chem {

namespace {

constexpr uint64_t kFnvOffset = 14695981039346656037ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

uint64_t fnv1a_u64(uint64_t h, uint64_t v) {
  for (int k = 0; k < 8; ++k) {
    h ^= (v >> (8 * k)) & 0xFF;
    h *= kFnvPrime;
  }
  return h;
}

uint64_t hash_words(const std::vector<uint64_t>& ws) {
  uint64_t h = kFnvOffset;
  for (uint64_t w : ws) h = fnv1a_u64(h, w);
  return h;
}

// An atom is in a ring iff it touches a non-bridge bond. Molecules are tiny,
// so the remove-edge-and-check test is fine.
std::vector<char> ring_atoms(const MolGraph& g) {
  const int n = static_cast<int>(g.atoms.size());
  std::vector<char> in_ring(n, 0);
  auto adj = g.adjacency();
  for (size_t e = 0; e < g.bonds.size(); ++e) {
    const int a = g.bonds[e].a, b = g.bonds[e].b;
    // BFS from a to b avoiding edge e.
    std::vector<char> seen(n, 0);
    std::vector<int> stack{a};
    seen[a] = 1;
    bool reached = false;
    while (!stack.empty() && !reached) {
      int v = stack.back();
      stack.pop_back();
      for (auto [u, ei] : adj[v]) {
        if (ei == static_cast<int>(e) || seen[u]) continue;
        if (u == b) {
          reached = true;
          break;
        }
        seen[u] = 1;
        stack.push_back(u);
      }
    }
    if (reached) {
      in_ring[a] = 1;
      in_ring[b] = 1;
    }
  }
  return in_ring;
}

bool is_power_of_two(int w) { return w > 0 && (w & (w - 1)) == 0; }

}  // namespace

Fingerprint::Fingerprint(int w, int r) : width(w), radius(r) {
  if (!is_power_of_two(w) || w < 8)
    throw Error("InvalidWidth", "fingerprint width must be a power of two >= 8, got " +
                                    std::to_string(w));
  words.assign((w + 63) / 64, 0);
}

int Fingerprint::popcount() const {
  int c = 0;
  for (uint64_t w : words) c += std::popcount(w);
  return c;
}

std::string Fingerprint::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out(width / 4, '0');
  for (int nib = 0; nib < width / 4; ++nib) {
    int lo = width - 4 * (nib + 1);
    int v = 0;
    for (int k = 0; k < 4; ++k)
      if (test(static_cast<uint64_t>(lo + k))) v |= 1 << k;
    out[nib] = digits[v];
  }
  return out;
}

Fingerprint Fingerprint::from_hex(const std::string& hex, int radius) {
  const int width = static_cast<int>(hex.size()) * 4;
  Fingerprint fp(width, radius);
  for (size_t nib = 0; nib < hex.size(); ++nib) {
    char c = hex[nib];
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      v = c - 'A' + 10;
    else
      throw Error("MalformedHex", "invalid hex digit '" + std::string(1, c) + "'");
    int lo = width - 4 * (static_cast<int>(nib) + 1);
    for (int k = 0; k < 4; ++k)
      if (v & (1 << k)) fp.set(static_cast<uint64_t>(lo + k));
  }
  return fp;
}

Fingerprint morgan_fingerprint(const MolGraph& g, int radius, int width) {
  if (radius < 0) throw Error("InvalidRadius", "radius must be >= 0");
  Fingerprint fp(width, radius);
  auto adj = g.adjacency();
  auto in_ring = ring_atoms(g);

  const size_t n = g.atoms.size();
  std::vector<uint64_t> inv(n);
  for (size_t a = 0; a < n; ++a) {
    const Atom& at = g.atoms[a];
    inv[a] = hash_words({static_cast<uint64_t>(atomic_number(at.element)),
                         static_cast<uint64_t>(adj[a].size()),
                         static_cast<uint64_t>(static_cast<int64_t>(at.charge) + 1000),
                         static_cast<uint64_t>(at.explicit_h),
                         static_cast<uint64_t>(at.aromatic ? 1 : 0),
                         static_cast<uint64_t>(in_ring[a] ? 1 : 0)});
  }

  const uint64_t mask = static_cast<uint64_t>(width) - 1;
  for (size_t a = 0; a < n; ++a) fp.set(inv[a] & mask);

  for (int r = 1; r <= radius; ++r) {
    std::vector<uint64_t> next(n);
    for (size_t a = 0; a < n; ++a) {
      std::vector<uint64_t> env;
      env.push_back(inv[a]);
      std::vector<std::pair<uint64_t, uint64_t>> nbrs;
      for (auto [u, e] : adj[a])
        nbrs.emplace_back(static_cast<uint64_t>(g.bonds[e].order), inv[u]);
      std::sort(nbrs.begin(), nbrs.end());
      for (auto& [bo, iv] : nbrs) {
        env.push_back(bo);
        env.push_back(iv);
      }
      next[a] = hash_words(env);
    }
    inv = std::move(next);
    for (size_t a = 0; a < n; ++a) fp.set(inv[a] & mask);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width != b.width)
    throw Error("WidthMismatch", "fingerprint widths differ: " + std::to_string(a.width) +
                                     " vs " + std::to_string(b.width));
  int inter = 0, uni = 0;
  for (size_t w = 0; w < a.words.size(); ++w) {
    inter += std::popcount(a.words[w] & b.words[w]);
    uni += std::popcount(a.words[w] | b.words[w]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace pacc::chem
