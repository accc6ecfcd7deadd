#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pacc/error.hpp"

namespace pacc::chem {

enum class BondOrder : uint8_t { kSingle = 1, kDouble = 2, kTriple = 3, kAromatic = 4 };

struct Atom {
  std::string element;      // "C", "Cl", "N", ...
  bool aromatic = false;
  int charge = 0;
  int explicit_h = 0;       // H count from bracket notation; bare atoms carry 0
  std::optional<int> isotope;
  bool bracketed = false;
  std::string chirality;    // "@" / "@@"; recorded, no semantics
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::kSingle;
  char stereo = 0;          // '/' or '\\'; recorded, no semantics
};

// Parsed molecular graph. Multi-fragment ("." separated) inputs yield one
// graph with num_fragments > 1.
struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::string source;
  int num_fragments = 1;

  bool multi_fragment() const { return num_fragments > 1; }

  // Per-atom list of (neighbor atom index, bond index).
  std::vector<std::vector<std::pair<int, int>>> adjacency() const;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& code, size_t offset, const std::string& msg);
  size_t offset;
};

// Grammar subset: organic-subset atoms B C N O P S F Cl Br I, aromatic
// lowercase b c n o s p, bracket atoms with isotope/chirality/H-count/charge,
// bonds - = # : / \, branches, ring closures 1-9 and %nn, dot fragments.
// Stereo bond and chirality tokens are recorded but carry no semantics.
MolGraph parse_smiles(const std::string& s);

// Depth-first serialization starting at start_atom with a seed-determined
// neighbor permutation. The output re-parses to a graph with the same
// canonical form.
std::string write_smiles(const MolGraph& g, int start_atom, uint64_t neighbor_order_seed);

// Up to n distinct serializations of g, deterministic given seed. Returns
// fewer when the molecule admits fewer distinct strings (rejection sampling
// capped at 50*n attempts).
std::vector<std::string> enumerate_smiles(const MolGraph& g, int n = 32, uint64_t seed = 0);

// Iterative-refinement canonical atom ranks (0 = top). Ties are split by
// (invariant, smallest original index).
std::vector<int> canonical_ranks(const MolGraph& g);

// Canonical serialization: write from the top-ranked atom with rank-ordered
// neighbors; fragments sorted lexicographically. Idempotent.
std::string canonical_form(const MolGraph& g);

// Atomic number for a recognized element symbol, 0 when unknown.
int atomic_number(const std::string& symbol);

}  // namespace pacc::chem
