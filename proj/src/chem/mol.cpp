#include "pacc/chem/mol.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "pacc/rng.hpp"

namespace pacc::chem {

namespace {

const std::unordered_map<std::string, int>& element_table() {
  static const std::unordered_map<std::string, int> table = {
      {"H", 1},   {"He", 2},  {"Li", 3},  {"Be", 4},  {"B", 5},   {"C", 6},
      {"N", 7},   {"O", 8},   {"F", 9},   {"Ne", 10}, {"Na", 11}, {"Mg", 12},
      {"Al", 13}, {"Si", 14}, {"P", 15},  {"S", 16},  {"Cl", 17}, {"Ar", 18},
      {"K", 19},  {"Ca", 20}, {"Sc", 21}, {"Ti", 22}, {"V", 23},  {"Cr", 24},
      {"Mn", 25}, {"Fe", 26}, {"Co", 27}, {"Ni", 28}, {"Cu", 29}, {"Zn", 30},
      {"Ga", 31}, {"Ge", 32}, {"As", 33}, {"Se", 34}, {"Br", 35}, {"Kr", 36},
      {"Rb", 37}, {"Sr", 38}, {"Y", 39},  {"Zr", 40}, {"Nb", 41}, {"Mo", 42},
      {"Tc", 43}, {"Ru", 44}, {"Rh", 45}, {"Pd", 46}, {"Ag", 47}, {"Cd", 48},
      {"In", 49}, {"Sn", 50}, {"Sb", 51}, {"Te", 52}, {"I", 53},  {"Xe", 54},
      {"Cs", 55}, {"Ba", 56}, {"La", 57}, {"Ce", 58}, {"Pr", 59}, {"Nd", 60},
      {"Pm", 61}, {"Sm", 62}, {"Eu", 63}, {"Gd", 64}, {"Tb", 65}, {"Dy", 66},
      {"Ho", 67}, {"Er", 68}, {"Tm", 69}, {"Yb", 70}, {"Lu", 71}, {"Hf", 72},
      {"Ta", 73}, {"W", 74},  {"Re", 75}, {"Os", 76}, {"Ir", 77}, {"Pt", 78},
      {"Au", 79}, {"Hg", 80}, {"Tl", 81}, {"Pb", 82}, {"Bi", 83}, {"Po", 84},
      {"At", 85}, {"Rn", 86}, {"Fr", 87}, {"Ra", 88}, {"Ac", 89}, {"Th", 90},
      {"Pa", 91}, {"U", 92},
  };
  return table;
}

bool is_organic_subset(const std::string& sym) {
  static const std::set<std::string> organic = {"B", "C", "N", "O", "P",
                                                "S", "F", "Cl", "Br", "I"};
  return organic.count(sym) > 0;
}

bool is_aromatic_symbol(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 's' || c == 'p';
}

BondOrder order_of_char(char c) {
  switch (c) {
    case '-': return BondOrder::kSingle;
    case '=': return BondOrder::kDouble;
    case '#': return BondOrder::kTriple;
    case ':': return BondOrder::kAromatic;
    case '/': return BondOrder::kSingle;
    case '\\': return BondOrder::kSingle;
    default: return BondOrder::kSingle;
  }
}

BondOrder default_order(const Atom& a, const Atom& b) {
  return (a.aromatic && b.aromatic) ? BondOrder::kAromatic : BondOrder::kSingle;
}

char char_of_order(BondOrder o) {
  switch (o) {
    case BondOrder::kSingle: return '-';
    case BondOrder::kDouble: return '=';
    case BondOrder::kTriple: return '#';
    case BondOrder::kAromatic: return ':';
  }
  return '-';
}

struct Parser {
  const std::string& s;
  size_t i = 0;
  MolGraph g;
  std::vector<std::pair<int, size_t>> branch_stack;  // (prev atom, '(' offset)
  int prev = -1;
  char pending_bond = 0;
  size_t pending_bond_pos = 0;

  struct RingOpen {
    int atom;
    char bond;
    size_t pos;
  };
  std::map<int, RingOpen> open_rings;

  explicit Parser(const std::string& str) : s(str) { g.source = str; }

  [[noreturn]] void fail(const std::string& code, size_t off, const std::string& msg) {
    throw ParseError(code, off, msg);
  }

  void add_bond(int a, int b, char bond_char, size_t off) {
    if (a == b) fail("MalformedInput", off, "bond from an atom to itself");
    for (const Bond& bd : g.bonds) {
      if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
        fail("MalformedInput", off, "duplicate bond between atoms " +
                                        std::to_string(a) + " and " + std::to_string(b));
    }
    Bond bd;
    bd.a = a;
    bd.b = b;
    if (bond_char != 0) {
      bd.order = order_of_char(bond_char);
      if (bond_char == '/' || bond_char == '\\') bd.stereo = bond_char;
    } else {
      bd.order = default_order(g.atoms[a], g.atoms[b]);
    }
    g.bonds.push_back(bd);
  }

  void attach_atom(int idx) {
    if (prev >= 0) add_bond(prev, idx, pending_bond, pending_bond ? pending_bond_pos : i);
    pending_bond = 0;
    prev = idx;
  }

  void parse_bare_atom() {
    size_t start = i;
    Atom a;
    // Two-character halogens first.
    if (s.compare(i, 2, "Cl") == 0) {
      a.element = "Cl";
      i += 2;
    } else if (s.compare(i, 2, "Br") == 0) {
      a.element = "Br";
      i += 2;
    } else {
      char c = s[i];
      if (c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' || c == 'S' ||
          c == 'F' || c == 'I') {
        a.element = std::string(1, c);
        ++i;
      } else if (is_aromatic_symbol(c)) {
        a.element = std::string(1, static_cast<char>(std::toupper(c)));
        a.aromatic = true;
        ++i;
      } else {
        fail("UnknownAtomSymbol", start, "unrecognized atom symbol '" + std::string(1, c) + "'");
      }
    }
    g.atoms.push_back(a);
    attach_atom(static_cast<int>(g.atoms.size()) - 1);
  }

  void parse_bracket_atom() {
    size_t open = i;
    ++i;  // '['
    size_t close = s.find(']', i);
    if (close == std::string::npos)
      fail("MalformedInput", open, "unclosed bracket atom");
    Atom a;
    a.bracketed = true;

    // Isotope.
    size_t j = i;
    if (j < close && std::isdigit(static_cast<unsigned char>(s[j]))) {
      int iso = 0;
      while (j < close && std::isdigit(static_cast<unsigned char>(s[j]))) {
        iso = iso * 10 + (s[j] - '0');
        ++j;
      }
      a.isotope = iso;
    }

    // Element symbol.
    size_t sym_pos = j;
    if (j >= close) fail("UnknownAtomSymbol", sym_pos, "missing element symbol in bracket");
    if (std::isupper(static_cast<unsigned char>(s[j]))) {
      std::string sym(1, s[j]);
      ++j;
      // Greedy two-letter match when it forms a known element ([Cl], [Se]).
      if (j < close && std::islower(static_cast<unsigned char>(s[j])) &&
          element_table().count(sym + s[j]) > 0) {
        sym += s[j];
        ++j;
      }
      if (element_table().count(sym) == 0)
        fail("UnknownAtomSymbol", sym_pos, "unknown element '" + sym + "'");
      a.element = sym;
    } else if (is_aromatic_symbol(s[j])) {
      a.element = std::string(1, static_cast<char>(std::toupper(s[j])));
      a.aromatic = true;
      ++j;
    } else {
      fail("UnknownAtomSymbol", sym_pos, "unknown element '" + std::string(1, s[j]) + "'");
    }

    // Chirality.
    if (j < close && s[j] == '@') {
      if (j + 1 < close && s[j + 1] == '@') {
        a.chirality = "@@";
        j += 2;
      } else {
        a.chirality = "@";
        ++j;
      }
    }

    // Explicit hydrogens.
    if (j < close && s[j] == 'H') {
      ++j;
      int h = 1;
      if (j < close && std::isdigit(static_cast<unsigned char>(s[j]))) {
        h = 0;
        while (j < close && std::isdigit(static_cast<unsigned char>(s[j]))) {
          h = h * 10 + (s[j] - '0');
          ++j;
        }
      }
      a.explicit_h = h;
    }

    // Charge.
    if (j < close && (s[j] == '+' || s[j] == '-')) {
      char sign_char = s[j];
      int sign = sign_char == '+' ? 1 : -1;
      ++j;
      int magnitude = 1;
      if (j < close && std::isdigit(static_cast<unsigned char>(s[j]))) {
        magnitude = 0;
        while (j < close && std::isdigit(static_cast<unsigned char>(s[j]))) {
          magnitude = magnitude * 10 + (s[j] - '0');
          ++j;
        }
      } else {
        while (j < close && s[j] == sign_char) {
          ++magnitude;
          ++j;
        }
      }
      a.charge = sign * magnitude;
    }

    if (j != close)
      fail("MalformedInput", j, "unexpected character '" + std::string(1, s[j]) +
                                    "' in bracket atom");
    i = close + 1;
    g.atoms.push_back(a);
    attach_atom(static_cast<int>(g.atoms.size()) - 1);
  }

  void handle_ring_digit(int digit, size_t pos) {
    if (prev < 0) fail("MalformedInput", pos, "ring closure before any atom");
    auto it = open_rings.find(digit);
    if (it == open_rings.end()) {
      open_rings[digit] = RingOpen{prev, pending_bond, pos};
      pending_bond = 0;
      return;
    }
    RingOpen o = it->second;
    open_rings.erase(it);
    if (o.atom == prev)
      fail("MalformedInput", pos, "ring closure bonds an atom to itself");
    char bond = 0;
    if (o.bond != 0 && pending_bond != 0 && order_of_char(o.bond) != order_of_char(pending_bond))
      fail("MalformedInput", pos, "conflicting bond orders on ring closure");
    bond = pending_bond != 0 ? pending_bond : o.bond;
    add_bond(o.atom, prev, bond, pos);
    pending_bond = 0;
  }

  MolGraph run() {
    if (s.empty()) fail("EmptyInput", 0, "empty SMILES string");
    while (i < s.size()) {
      char c = s[i];
      if (c == '(') {
        if (prev < 0) fail("MalformedInput", i, "branch before any atom");
        branch_stack.emplace_back(prev, i);
        ++i;
      } else if (c == ')') {
        if (branch_stack.empty())
          fail("UnbalancedParenthesis", i, "unmatched ')'");
        if (pending_bond != 0)
          fail("MalformedInput", pending_bond_pos, "dangling bond before ')'");
        prev = branch_stack.back().first;
        branch_stack.pop_back();
        ++i;
      } else if (c == '.') {
        if (!branch_stack.empty())
          fail("MalformedInput", i, "fragment separator inside a branch");
        if (pending_bond != 0)
          fail("MalformedInput", pending_bond_pos, "dangling bond before '.'");
        if (prev < 0) fail("MalformedInput", i, "fragment separator before any atom");
        prev = -1;
        ++i;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (pending_bond != 0)
          fail("MalformedInput", i, "consecutive bond symbols");
        pending_bond = c;
        pending_bond_pos = i;
        ++i;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        handle_ring_digit(c - '0', i);
        ++i;
      } else if (c == '%') {
        if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s[i + 2])))
          fail("MalformedInput", i, "'%' ring closure requires two digits");
        handle_ring_digit((s[i + 1] - '0') * 10 + (s[i + 2] - '0'), i);
        i += 3;
      } else if (c == '[') {
        parse_bracket_atom();
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        parse_bare_atom();
      } else {
        fail("MalformedInput", i, "unexpected character '" + std::string(1, c) + "'");
      }
    }
    if (!branch_stack.empty())
      fail("UnbalancedParenthesis", branch_stack.back().second, "unmatched '('");
    if (!open_rings.empty()) {
      size_t off = open_rings.begin()->second.pos;
      for (const auto& [d, o] : open_rings) off = std::min(off, o.pos);
      fail("UnclosedRingBond", off, "ring bond opened but never closed");
    }
    if (pending_bond != 0)
      fail("MalformedInput", pending_bond_pos, "dangling bond at end of input");
    if (g.atoms.empty()) fail("EmptyInput", 0, "no atoms in input");

    // Fragment count from connectivity.
    std::vector<int> comp(g.atoms.size(), -1);
    auto adj = g.adjacency();
    int ncomp = 0;
    for (size_t a = 0; a < g.atoms.size(); ++a) {
      if (comp[a] >= 0) continue;
      std::vector<int> stack{static_cast<int>(a)};
      comp[a] = ncomp;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (auto [u, e] : adj[v]) {
          if (comp[u] < 0) {
            comp[u] = ncomp;
            stack.push_back(u);
          }
        }
      }
      ++ncomp;
    }
    g.num_fragments = ncomp;
    return std::move(g);
  }
};

std::string atom_token(const Atom& a) {
  std::string sym = a.element;
  if (a.aromatic) {
    for (char& c : sym) c = static_cast<char>(std::tolower(c));
  }
  bool bare = !a.bracketed && a.charge == 0 && a.explicit_h == 0 && !a.isotope &&
              a.chirality.empty() && is_organic_subset(a.element);
  if (bare) return sym;
  std::string out = "[";
  if (a.isotope) out += std::to_string(*a.isotope);
  out += sym;
  out += a.chirality;
  if (a.explicit_h == 1)
    out += "H";
  else if (a.explicit_h > 1)
    out += "H" + std::to_string(a.explicit_h);
  if (a.charge == 1)
    out += "+";
  else if (a.charge == -1)
    out += "-";
  else if (a.charge > 1)
    out += "+" + std::to_string(a.charge);
  else if (a.charge < -1)
    out += "-" + std::to_string(-a.charge);
  out += "]";
  return out;
}

// Neighbor ordering callback: reorders the (atom, bond) list in place.
using OrderFn = std::function<void(int atom, std::vector<std::pair<int, int>>&)>;

struct ComponentWriter {
  const MolGraph& g;
  const std::vector<std::vector<std::pair<int, int>>>& adj;
  const OrderFn& order;

  std::vector<char> visited;
  std::vector<char> edge_used;
  std::vector<int> preorder_pos;
  std::vector<std::vector<std::pair<int, int>>> children;  // (child atom, bond)
  struct BackEdge {
    int early, late, bond;
  };
  std::vector<BackEdge> back_edges;
  int next_pos = 0;

  ComponentWriter(const MolGraph& mg, const std::vector<std::vector<std::pair<int, int>>>& a,
                  const OrderFn& o)
      : g(mg), adj(a), order(o) {
    visited.assign(g.atoms.size(), 0);
    edge_used.assign(g.bonds.size(), 0);
    preorder_pos.assign(g.atoms.size(), -1);
    children.resize(g.atoms.size());
  }

  void plan(int v) {
    visited[v] = 1;
    preorder_pos[v] = next_pos++;
    auto neighbors = adj[v];
    order(v, neighbors);
    for (auto [u, e] : neighbors) {
      if (edge_used[e]) continue;
      edge_used[e] = 1;
      if (visited[u]) {
        if (preorder_pos[u] < preorder_pos[v])
          back_edges.push_back({u, v, e});
        else
          back_edges.push_back({v, u, e});
      } else {
        children[v].emplace_back(u, e);
        plan(u);
      }
    }
  }

  std::string write(int start) {
    plan(start);
    // Assign ring-closure digits along the preorder walk.
    std::vector<std::vector<int>> opens(g.atoms.size()), closes(g.atoms.size());
    for (size_t k = 0; k < back_edges.size(); ++k) {
      opens[back_edges[k].early].push_back(static_cast<int>(k));
      closes[back_edges[k].late].push_back(static_cast<int>(k));
    }
    auto by_other_pos = [&](int a) {
      return [&, a](int x, int y) {
        auto other = [&](const BackEdge& be) { return be.early == a ? be.late : be.early; };
        return preorder_pos[other(back_edges[x])] < preorder_pos[other(back_edges[y])];
      };
    };
    std::vector<int> atoms_in_preorder;
    for (size_t a = 0; a < g.atoms.size(); ++a)
      if (preorder_pos[a] >= 0) atoms_in_preorder.push_back(static_cast<int>(a));
    std::sort(atoms_in_preorder.begin(), atoms_in_preorder.end(),
              [&](int x, int y) { return preorder_pos[x] < preorder_pos[y]; });

    std::vector<int> digit_of(back_edges.size(), -1);
    std::set<int> free_digits;
    for (int d = 1; d <= 99; ++d) free_digits.insert(d);
    for (int a : atoms_in_preorder) {
      std::sort(closes[a].begin(), closes[a].end(), by_other_pos(a));
      std::sort(opens[a].begin(), opens[a].end(), by_other_pos(a));
      for (int k : closes[a]) free_digits.insert(digit_of[k]);
      for (int k : opens[a]) {
        if (free_digits.empty())
          throw Error("RingDigitOverflow", "more than 99 concurrently open ring bonds");
        digit_of[k] = *free_digits.begin();
        free_digits.erase(free_digits.begin());
      }
    }

    std::string out;
    emit(start, opens, closes, digit_of, out);
    return out;
  }

  void append_digit(std::string& out, int digit) {
    if (digit < 10)
      out += static_cast<char>('0' + digit);
    else {
      out += '%';
      out += static_cast<char>('0' + digit / 10);
      out += static_cast<char>('0' + digit % 10);
    }
  }

  void emit(int v, const std::vector<std::vector<int>>& opens,
            const std::vector<std::vector<int>>& closes, const std::vector<int>& digit_of,
            std::string& out) {
    out += atom_token(g.atoms[v]);
    for (int k : closes[v]) append_digit(out, digit_of[k]);
    for (int k : opens[v]) {
      const Bond& bd = g.bonds[back_edges[k].bond];
      if (bd.order != default_order(g.atoms[bd.a], g.atoms[bd.b]))
        out += char_of_order(bd.order);
      append_digit(out, digit_of[k]);
    }
    const auto& kids = children[v];
    for (size_t c = 0; c < kids.size(); ++c) {
      const Bond& bd = g.bonds[kids[c].second];
      std::string bond_str;
      if (bd.order != default_order(g.atoms[bd.a], g.atoms[bd.b]))
        bond_str = std::string(1, char_of_order(bd.order));
      if (c + 1 < kids.size()) {
        out += "(" + bond_str;
        emit(kids[c].first, opens, closes, digit_of, out);
        out += ")";
      } else {
        out += bond_str;
        emit(kids[c].first, opens, closes, digit_of, out);
      }
    }
  }
};

std::vector<int> component_of(const MolGraph& g) {
  auto adj = g.adjacency();
  std::vector<int> comp(g.atoms.size(), -1);
  int ncomp = 0;
  for (size_t a = 0; a < g.atoms.size(); ++a) {
    if (comp[a] >= 0) continue;
    std::vector<int> stack{static_cast<int>(a)};
    comp[a] = ncomp;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (auto [u, e] : adj[v])
        if (comp[u] < 0) {
          comp[u] = ncomp;
          stack.push_back(u);
        }
    }
    ++ncomp;
  }
  return comp;
}

}  // namespace

ParseError::ParseError(const std::string& code, size_t off, const std::string& msg)
    : Error(code, "offset " + std::to_string(off) + ": " + msg), offset(off) {}

std::vector<std::vector<std::pair<int, int>>> MolGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, int>>> adj(atoms.size());
  for (size_t e = 0; e < bonds.size(); ++e) {
    adj[bonds[e].a].emplace_back(bonds[e].b, static_cast<int>(e));
    adj[bonds[e].b].emplace_back(bonds[e].a, static_cast<int>(e));
  }
  return adj;
}

int atomic_number(const std::string& symbol) {
  auto it = element_table().find(symbol);
  return it == element_table().end() ? 0 : it->second;
}

MolGraph parse_smiles(const std::string& s) {
  Parser p(s);
  return p.run();
}

std::string write_smiles(const MolGraph& g, int start_atom, uint64_t neighbor_order_seed) {
  if (start_atom < 0 || start_atom >= static_cast<int>(g.atoms.size()))
    throw Error("InvalidStartAtom", "start atom " + std::to_string(start_atom) +
                                        " out of range for " + std::to_string(g.atoms.size()) +
                                        " atoms");
  auto adj = g.adjacency();
  RngStream rng(neighbor_order_seed);
  OrderFn shuffled = [&rng](int, std::vector<std::pair<int, int>>& nbrs) {
    rng.shuffle(nbrs);
  };

  auto comp = component_of(g);
  std::vector<int> first_atom;  // smallest atom index per component
  {
    int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
    first_atom.assign(ncomp, -1);
    for (size_t a = 0; a < comp.size(); ++a)
      if (first_atom[comp[a]] < 0) first_atom[comp[a]] = static_cast<int>(a);
  }

  std::string out;
  {
    ComponentWriter w(g, adj, shuffled);
    out = w.write(start_atom);
  }
  for (size_t c = 0; c < first_atom.size(); ++c) {
    if (static_cast<int>(c) == comp[start_atom]) continue;
    // Seeded start atom within the remaining component.
    std::vector<int> members;
    for (size_t a = 0; a < comp.size(); ++a)
      if (comp[a] == static_cast<int>(c)) members.push_back(static_cast<int>(a));
    int start = members[rng.next_below(members.size())];
    ComponentWriter w(g, adj, shuffled);
    out += "." + w.write(start);
  }
  return out;
}

std::vector<std::string> enumerate_smiles(const MolGraph& g, int n, uint64_t seed) {
  if (n < 1) throw Error("InvalidCount", "enumerate_smiles requires n >= 1");
  RngStream rng(seed);
  std::vector<std::string> out;
  std::set<std::string> seen;
  const int max_attempts = 50 * n;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n; ++attempt) {
    int start = static_cast<int>(rng.next_below(g.atoms.size()));
    std::string s = write_smiles(g, start, rng.next_u64());
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

std::vector<int> canonical_ranks(const MolGraph& g) {
  const size_t n = g.atoms.size();
  if (n == 0) return {};
  auto adj = g.adjacency();

  // Initial invariant: element, aromaticity, charge, H count, isotope,
  // bracket flag, chirality, degree.
  std::vector<std::vector<int64_t>> keys(n);
  for (size_t a = 0; a < n; ++a) {
    const Atom& at = g.atoms[a];
    int chir = at.chirality.empty() ? 0 : (at.chirality == "@" ? 1 : 2);
    keys[a] = {atomic_number(at.element),
               at.aromatic ? 1 : 0,
               at.charge,
               at.explicit_h,
               at.isotope ? *at.isotope : -1,
               at.bracketed ? 1 : 0,
               chir,
               static_cast<int64_t>(adj[a].size())};
  }

  std::vector<int> rank(n, 0);
  auto assign_ranks = [&](const std::vector<std::vector<int64_t>>& ks) {
    std::vector<int> idx(n);
    for (size_t a = 0; a < n; ++a) idx[a] = static_cast<int>(a);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) { return ks[x] < ks[y]; });
    int r = 0;
    rank[idx[0]] = 0;
    for (size_t k = 1; k < n; ++k) {
      if (ks[idx[k]] != ks[idx[k - 1]]) ++r;
      rank[idx[k]] = r;
    }
    return r + 1;
  };

  int classes = assign_ranks(keys);

  auto refine = [&]() {
    while (true) {
      std::vector<std::vector<int64_t>> ks(n);
      for (size_t a = 0; a < n; ++a) {
        ks[a].push_back(rank[a]);
        std::vector<int64_t> nbrs;
        for (auto [u, e] : adj[a])
          nbrs.push_back(static_cast<int64_t>(rank[u]) * 8 +
                         static_cast<int64_t>(g.bonds[e].order));
        std::sort(nbrs.begin(), nbrs.end());
        ks[a].insert(ks[a].end(), nbrs.begin(), nbrs.end());
      }
      int next = assign_ranks(ks);
      if (next == classes) break;
      classes = next;
    }
  };

  refine();
  // Split remaining ties: distinguish the smallest-index member of the
  // lowest tied class, then re-refine.
  while (classes < static_cast<int>(n)) {
    int tie_rank = -1, chosen = -1;
    std::vector<int> count(classes, 0);
    for (size_t a = 0; a < n; ++a) ++count[rank[a]];
    for (int r = 0; r < classes; ++r)
      if (count[r] > 1) {
        tie_rank = r;
        break;
      }
    for (size_t a = 0; a < n; ++a)
      if (rank[a] == tie_rank) {
        chosen = static_cast<int>(a);
        break;
      }
    for (size_t a = 0; a < n; ++a)
      if (rank[a] > tie_rank || (rank[a] == tie_rank && static_cast<int>(a) != chosen))
        ++rank[a];
    ++classes;
    refine();
  }
  return rank;
}

std::string canonical_form(const MolGraph& g) {
  if (g.atoms.empty()) throw Error("EmptyInput", "cannot canonicalize an empty graph");
  auto adj = g.adjacency();
  auto rank = canonical_ranks(g);
  OrderFn by_rank = [&rank](int, std::vector<std::pair<int, int>>& nbrs) {
    std::sort(nbrs.begin(), nbrs.end(), [&](const auto& x, const auto& y) {
      return std::make_pair(rank[x.first], x.first) < std::make_pair(rank[y.first], y.first);
    });
  };

  auto comp = component_of(g);
  int ncomp = *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<std::string> parts;
  for (int c = 0; c < ncomp; ++c) {
    int best = -1;
    for (size_t a = 0; a < comp.size(); ++a)
      if (comp[a] == c && (best < 0 || rank[a] < rank[best])) best = static_cast<int>(a);
    ComponentWriter w(g, adj, by_rank);
    parts.push_back(w.write(best));
  }
  std::sort(parts.begin(), parts.end());
  std::string out = parts[0];
  for (size_t k = 1; k < parts.size(); ++k) out += "." + parts[k];
  return out;
}

}  // namespace pacc::chem
