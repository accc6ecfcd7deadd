#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacc/chem/mol.hpp"

namespace pacc::chem {

// Fixed-width binary fingerprint. Width is a power of two (default 512).
struct Fingerprint {
  int width = 512;
  int radius = 2;
  std::vector<uint64_t> words;

  Fingerprint() : words(512 / 64, 0) {}
  Fingerprint(int w, int r);

  void set(uint64_t bit) { words[bit / 64] |= (1ull << (bit % 64)); }
  bool test(uint64_t bit) const { return (words[bit / 64] >> (bit % 64)) & 1ull; }
  int popcount() const;

  // Hex rendering of the bit vector read as a big-endian integer (bit i has
  // weight 2^i, most significant nibble first).
  std::string to_hex() const;
  static Fingerprint from_hex(const std::string& hex, int radius = 2);
};

// Iterative-neighborhood (ECFP-style) fingerprint. The initial atom
// invariant is (element, degree, charge, H count, aromatic flag, in-ring
// flag); each round mixes the sorted (bond order, neighbor invariant) list
// through FNV-1a 64 and sets bit (hash mod width). Environments accumulate
// over rounds 0..radius, so bits grow monotonically with radius.
Fingerprint morgan_fingerprint(const MolGraph& g, int radius = 2, int width = 512);

// |a AND b| / |a OR b|; 1.0 when both fingerprints are empty.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

}  // namespace pacc::chem
