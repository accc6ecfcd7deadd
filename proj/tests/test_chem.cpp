#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fuzz_mols.hpp"
#include "pacc/chem/fingerprint.hpp"
#include "pacc/chem/mol.hpp"
#include "pacc/chem/token.hpp"

using namespace pacc;
using namespace pacc::chem;

namespace {

// Test-only oracle: every DFS serialization of an acyclic molecule, by
// direct recursion over starts and neighbor permutations. Independent of the
// production writer (no ring-closure machinery needed for trees).
std::set<std::string> tree_serializations(const MolGraph& g) {
  auto adj = g.adjacency();
  std::set<std::string> all;

  struct Rec {
    const MolGraph& g;
    const std::vector<std::vector<std::pair<int, int>>>& adj;
    std::set<std::string> subtree(int v, int parent) {
      std::vector<int> kids;
      for (auto [u, e] : adj[v])
        if (u != parent) kids.push_back(u);
      std::string head = g.atoms[v].element;  // organic subset, no brackets
      if (g.atoms[v].aromatic)
        for (char& c : head) c = static_cast<char>(std::tolower(c));
      if (kids.empty()) return {head};
      std::set<std::string> out;
      std::sort(kids.begin(), kids.end());
      do {
        std::vector<std::set<std::string>> parts;
        for (int u : kids) parts.push_back(subtree(u, v));
        std::vector<std::string> acc{head};
        for (size_t k = 0; k < parts.size(); ++k) {
          std::vector<std::string> next;
          for (const std::string& pre : acc)
            for (const std::string& sub : parts[k]) {
              if (k + 1 < parts.size())
                next.push_back(pre + "(" + sub + ")");
              else
                next.push_back(pre + sub);
            }
          acc = std::move(next);
        }
        out.insert(acc.begin(), acc.end());
      } while (std::next_permutation(kids.begin(), kids.end()));
      return out;
    }
  } rec{g, adj};

  for (size_t start = 0; start < g.atoms.size(); ++start) {
    auto s = rec.subtree(static_cast<int>(start), -1);
    all.insert(s.begin(), s.end());
  }
  return all;
}

}  // namespace

TEST_CASE("parse_smiles basic molecules") {
  MolGraph g = parse_smiles("CCO");
  CHECK(g.atoms.size() == 3);
  CHECK(g.atoms[0].element == "C");
  CHECK(g.atoms[1].element == "C");
  CHECK(g.atoms[2].element == "O");
  CHECK(g.bonds.size() == 2);
  CHECK(g.bonds[0].order == BondOrder::kSingle);
  CHECK(g.num_fragments == 1);

  MolGraph ring = parse_smiles("C1CC1");
  CHECK(ring.atoms.size() == 3);
  CHECK(ring.bonds.size() == 3);

  MolGraph benzene = parse_smiles("c1ccccc1");
  CHECK(benzene.atoms.size() == 6);
  CHECK(benzene.bonds.size() == 6);
  for (const Atom& a : benzene.atoms) {
    CHECK(a.aromatic);
    CHECK(a.element == "C");
  }
  for (const Bond& b : benzene.bonds) CHECK(b.order == BondOrder::kAromatic);
}

TEST_CASE("parse_smiles bracket atoms") {
  MolGraph g = parse_smiles("[NH4+]");
  CHECK(g.atoms.size() == 1);
  CHECK(g.atoms[0].element == "N");
  CHECK(g.atoms[0].explicit_h == 4);
  CHECK(g.atoms[0].charge == 1);
  CHECK(g.atoms[0].bracketed);

  MolGraph iso = parse_smiles("[13CH3]C");
  CHECK(iso.atoms[0].isotope == 13);
  CHECK(iso.atoms[0].explicit_h == 3);

  MolGraph chir = parse_smiles("[C@@H](F)(Cl)Br");
  CHECK(chir.atoms[0].chirality == "@@");
  CHECK(chir.atoms.size() == 4);
  CHECK(chir.bonds.size() == 3);

  MolGraph cu = parse_smiles("[Cu+2]");
  CHECK(cu.atoms[0].element == "Cu");
  CHECK(cu.atoms[0].charge == 2);
  CHECK(parse_smiles("[Cu++]").atoms[0].charge == 2);
  CHECK(parse_smiles("[O-]").atoms[0].charge == -1);
}

TEST_CASE("parse_smiles multi-fragment and stereo") {
  MolGraph g = parse_smiles("CC.O");
  CHECK(g.atoms.size() == 3);
  CHECK(g.num_fragments == 2);
  CHECK(g.multi_fragment());

  // Stereo bond tokens are accepted and recorded, with single-bond order.
  MolGraph st = parse_smiles("F/C=C/F");
  CHECK(st.bonds.size() == 3);
  CHECK(st.bonds[0].order == BondOrder::kSingle);
  CHECK(st.bonds[0].stereo == '/');
  CHECK(st.bonds[1].order == BondOrder::kDouble);
}

TEST_CASE("parse_smiles ring closure variants") {
  MolGraph pct = parse_smiles("C%12CC%12");
  CHECK(pct.atoms.size() == 3);
  CHECK(pct.bonds.size() == 3);

  MolGraph explicit_ring = parse_smiles("C=1CCC=1");
  bool found_double = false;
  for (const Bond& b : explicit_ring.bonds)
    if (b.a == 0 && b.b == 3 && b.order == BondOrder::kDouble) found_double = true;
    else if (b.a == 3 && b.b == 0 && b.order == BondOrder::kDouble) found_double = true;
  CHECK(found_double);
}

TEST_CASE("parse_smiles errors carry offsets") {
  CHECK_THROWS_WITH_AS(parse_smiles(""), doctest::Contains("EmptyInput"), ParseError);

  try {
    parse_smiles("C1CC");
    FAIL("expected UnclosedRingBond");
  } catch (const ParseError& e) {
    CHECK(e.code() == "UnclosedRingBond");
    CHECK(e.offset == 1);
  }

  try {
    parse_smiles("C(C(C)C");
    FAIL("expected UnbalancedParenthesis");
  } catch (const ParseError& e) {
    CHECK(e.code() == "UnbalancedParenthesis");
    CHECK(e.offset == 1);
  }

  try {
    parse_smiles("CC)C");
    FAIL("expected UnbalancedParenthesis");
  } catch (const ParseError& e) {
    CHECK(e.code() == "UnbalancedParenthesis");
    CHECK(e.offset == 2);
  }

  try {
    parse_smiles("CCq");
    FAIL("expected UnknownAtomSymbol");
  } catch (const ParseError& e) {
    CHECK(e.code() == "UnknownAtomSymbol");
    CHECK(e.offset == 2);
  }

  CHECK_THROWS_AS(parse_smiles("C=="), ParseError);
  CHECK_THROWS_AS(parse_smiles("C="), ParseError);
  CHECK_THROWS_AS(parse_smiles("(C)"), ParseError);
  CHECK_THROWS_AS(parse_smiles("C11"), ParseError);
  CHECK_THROWS_AS(parse_smiles("[Xx]"), ParseError);
  CHECK_THROWS_AS(parse_smiles("C%1C"), ParseError);
}

TEST_CASE("write_smiles basics") {
  MolGraph single = parse_smiles("C");
  CHECK(write_smiles(single, 0, 0) == "C");
  CHECK(write_smiles(single, 0, 12345) == "C");

  // DFS from the oxygen of CCO.
  MolGraph g = parse_smiles("CCO");
  std::string from_o = write_smiles(g, 2, 7);
  CHECK(from_o == "OCC");

  CHECK_THROWS_AS(write_smiles(g, 5, 0), Error);
}

TEST_CASE("write_smiles round trips to the same canonical form") {
  auto corpus = testutil::fuzz_corpus(60, 20260811);
  for (const auto& g : corpus) {
    std::string canon = canonical_form(g);
    for (uint64_t seed = 0; seed < 6; ++seed) {
      for (int start : {0, static_cast<int>(g.atoms.size()) - 1}) {
        std::string s = write_smiles(g, start, seed);
        MolGraph back = parse_smiles(s);
        CHECK(back.atoms.size() == g.atoms.size());
        CHECK(back.bonds.size() == g.bonds.size());
        CHECK(canonical_form(back) == canon);
      }
    }
  }
}

TEST_CASE("enumerate_smiles") {
  MolGraph methane = parse_smiles("C");
  auto one = enumerate_smiles(methane, 32, 99);
  CHECK(one.size() == 1);
  CHECK(one[0] == "C");

  // Exhaustive oracle over starts and neighbor orders for the tiny tree.
  MolGraph g = parse_smiles("CCO");
  auto expected = tree_serializations(g);
  CHECK(expected.size() == 4);  // CCO, OCC, C(C)O, C(O)C
  auto got = enumerate_smiles(g, 32, 41);
  std::set<std::string> got_set(got.begin(), got.end());
  CHECK(got_set == expected);

  MolGraph iso = parse_smiles("CC(C)O");
  auto expected_iso = tree_serializations(iso);
  auto got_iso = enumerate_smiles(iso, 64, 17);
  CHECK(std::set<std::string>(got_iso.begin(), got_iso.end()) == expected_iso);

  // Determinism.
  auto a = enumerate_smiles(iso, 8, 3);
  auto b = enumerate_smiles(iso, 8, 3);
  CHECK(a == b);

  // Every output parses back to the same canonical form.
  std::string canon = canonical_form(iso);
  for (const auto& s : got_iso) CHECK(canonical_form(parse_smiles(s)) == canon);
}

TEST_CASE("canonical_form identities") {
  CHECK(canonical_form(parse_smiles("OCC")) == canonical_form(parse_smiles("CCO")));
  CHECK(canonical_form(parse_smiles("C(O)C")) == canonical_form(parse_smiles("CCO")));

  // Ring written from different atoms.
  CHECK(canonical_form(parse_smiles("C1CC1")) == canonical_form(parse_smiles("C1CC1")));
  CHECK(canonical_form(parse_smiles("c1ccccc1")) ==
        canonical_form(parse_smiles("c1ccccc1")));

  // Idempotence.
  MolGraph g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  std::string c1 = canonical_form(g);
  CHECK(canonical_form(parse_smiles(c1)) == c1);

  // Multi-fragment: component order does not matter.
  CHECK(canonical_form(parse_smiles("CC.O")) == canonical_form(parse_smiles("O.CC")));
}

TEST_CASE("canonical_form agreement over enumerations") {
  auto corpus = testutil::fuzz_corpus(25, 777);
  for (const auto& g : corpus) {
    std::string canon = canonical_form(g);
    auto variants = enumerate_smiles(g, 100, 5);
    for (const auto& s : variants) CHECK(canonical_form(parse_smiles(s)) == canon);
  }
}

TEST_CASE("tokenize spec examples") {
  TokenSequence t = tokenize("CCO");
  CHECK(t.tokens == std::vector<std::string>{"C", "C", "O"});

  TokenSequence br = tokenize("[C@@H](Cl)Br");
  CHECK(br.tokens == std::vector<std::string>{"[C@@H]", "(", "Cl", ")", "Br"});

  TokenSequence pct = tokenize("C%12CC%12");
  CHECK(pct.tokens == std::vector<std::string>{"C", "%12", "C", "C", "%12"});

  CHECK_THROWS_WITH_AS(tokenize("C!O"), doctest::Contains("offset 1"), Error);
  CHECK_THROWS_AS(tokenize(""), Error);
}

TEST_CASE("tokenize/detokenize round trip") {
  auto corpus = testutil::fuzz_corpus(120, 31337);
  for (const auto& g : corpus) {
    for (const std::string& s : enumerate_smiles(g, 4, 9)) {
      TokenSequence t = tokenize(s);
      CHECK(detokenize(t) == s);
    }
  }
  TokenSequence single = tokenize("[NH4+]");
  CHECK(detokenize(single) == "[NH4+]");
}

TEST_CASE("tokenizer is total on writer output") {
  auto corpus = testutil::fuzz_corpus(80, 4242);
  for (const auto& g : corpus)
    for (uint64_t seed = 0; seed < 4; ++seed)
      CHECK_NOTHROW(tokenize(write_smiles(g, 0, seed)));
}

TEST_CASE("vocabulary determinism and reserved ids") {
  Vocabulary v = Vocabulary::build({"CCO", "c1ccccc1", "[NH4+]"});
  CHECK(v.id_of("<pad>") == 0);
  CHECK(v.token_of(0) == "<pad>");
  CHECK(v.token_of(1) == "<unk>");
  CHECK(v.id_of("zzz") == Vocabulary::kUnknown);

  // Lexicographic assignment: ids are ordered like the sorted token list.
  auto toks = v.tokens();
  CHECK(std::is_sorted(toks.begin(), toks.end()));
  for (size_t k = 0; k < toks.size(); ++k)
    CHECK(v.id_of(toks[k]) == static_cast<int>(k) + 2);

  Vocabulary v2 = Vocabulary::build({"[NH4+]", "CCO", "c1ccccc1"});
  CHECK(v == v2);

  TokenSequence t = tokenize("CCO");
  v.encode(t, 6);
  CHECK(t.ids.size() == 6);
  CHECK(t.ids[3] == Vocabulary::kPad);
  CHECK(t.pad_mask == std::vector<uint8_t>{1, 1, 1, 0, 0, 0});
  CHECK(v.token_of(t.ids[0]) == "C");
}

TEST_CASE("morgan fingerprint radius zero invariants") {
  MolGraph g = parse_smiles("CCO");
  Fingerprint fp = morgan_fingerprint(g, 0, 512);
  // Three distinct invariants: terminal C (x2), middle C, terminal O.
  CHECK(fp.popcount() <= 3);
  CHECK(fp.popcount() >= 2);

  // Same canonical form => identical fingerprint.
  Fingerprint fp2 = morgan_fingerprint(parse_smiles("OCC"), 2, 512);
  Fingerprint fp3 = morgan_fingerprint(parse_smiles("CCO"), 2, 512);
  CHECK(fp2.words == fp3.words);
}

TEST_CASE("fingerprint monotonicity in radius") {
  auto corpus = testutil::fuzz_corpus(40, 555);
  for (const auto& g : corpus) {
    Fingerprint prev = morgan_fingerprint(g, 0, 512);
    for (int r = 1; r <= 3; ++r) {
      Fingerprint cur = morgan_fingerprint(g, r, 512);
      for (size_t w = 0; w < prev.words.size(); ++w)
        CHECK((prev.words[w] & ~cur.words[w]) == 0);
      prev = cur;
    }
  }
}

TEST_CASE("fingerprint hex round trip") {
  MolGraph g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  Fingerprint fp = morgan_fingerprint(g, 2, 512);
  std::string hex = fp.to_hex();
  CHECK(hex.size() == 128);
  Fingerprint back = Fingerprint::from_hex(hex);
  CHECK(back.words == fp.words);
  CHECK(back.width == 512);
}

TEST_CASE("tanimoto") {
  Fingerprint a(512, 2), b(512, 2);
  a.set(1);
  a.set(2);
  a.set(3);
  b.set(2);
  b.set(3);
  b.set(4);
  CHECK(tanimoto(a, b) == 0.5);
  CHECK(tanimoto(a, a) == 1.0);
  CHECK(tanimoto(b, a) == tanimoto(a, b));

  Fingerprint empty1(512, 2), empty2(512, 2);
  CHECK(tanimoto(empty1, empty2) == 1.0);

  Fingerprint c(512, 2);
  c.set(100);
  CHECK(tanimoto(a, c) == 0.0);

  Fingerprint wide(1024, 2);
  CHECK_THROWS_WITH_AS(tanimoto(a, wide), doctest::Contains("WidthMismatch"), Error);
}

TEST_CASE("tanimoto matches brute force on random bitsets") {
  RngStream rng(606);
  for (int trial = 0; trial < 200; ++trial) {
    Fingerprint a(256, 2), b(256, 2);
    std::set<int> bits_a, bits_b;
    for (int k = 0; k < 30; ++k) {
      int ba = static_cast<int>(rng.next_below(256));
      int bb = static_cast<int>(rng.next_below(256));
      a.set(ba);
      bits_a.insert(ba);
      b.set(bb);
      bits_b.insert(bb);
    }
    std::set<int> inter, uni;
    std::set_intersection(bits_a.begin(), bits_a.end(), bits_b.begin(), bits_b.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(bits_a.begin(), bits_a.end(), bits_b.begin(), bits_b.end(),
                   std::inserter(uni, uni.begin()));
    double expected = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / uni.size();
    CHECK(tanimoto(a, b) == expected);
  }
}
