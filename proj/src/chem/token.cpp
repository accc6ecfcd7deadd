#include "pacc/chem/token.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace pacc::chem {

namespace {

bool is_single_char_token(char c) {
  switch (c) {
    case 'B': case 'C': case 'N': case 'O': case 'P': case 'S':
    case 'F': case 'I':
    case 'b': case 'c': case 'n': case 'o': case 's': case 'p':
    case '(': case ')': case '.': case '=': case '#': case '-':
    case '+': case '\\': case '/': case ':': case '~': case '@':
    case '*': case '$': case '?': case '>':
      return true;
    default:
      return std::isdigit(static_cast<unsigned char>(c)) != 0;
  }
}

}  // namespace

TokenSequence tokenize(const std::string& s) {
  if (s.empty()) throw Error("EmptyInput", "cannot tokenize an empty string");
  TokenSequence out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '[') {
      size_t close = s.find(']', i);
      if (close == std::string::npos)
        throw Error("TokenizationGap",
                    "offset " + std::to_string(i) + ": unclosed bracket expression");
      out.tokens.push_back(s.substr(i, close - i + 1));
      i = close + 1;
    } else if (c == '%') {
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2])))
        throw Error("TokenizationGap",
                    "offset " + std::to_string(i) + ": '%' without two digits");
      out.tokens.push_back(s.substr(i, 3));
      i += 3;
    } else if (s.compare(i, 2, "Cl") == 0 || s.compare(i, 2, "Br") == 0) {
      out.tokens.push_back(s.substr(i, 2));
      i += 2;
    } else if (is_single_char_token(c)) {
      out.tokens.push_back(std::string(1, c));
      ++i;
    } else {
      throw Error("TokenizationGap", "offset " + std::to_string(i) + ": character '" +
                                         std::string(1, c) + "' matches no token class");
    }
  }
  out.pad_mask.assign(out.tokens.size(), 1);
  return out;
}

std::string detokenize(const TokenSequence& t) {
  std::string out;
  for (size_t k = 0; k < t.tokens.size(); ++k) {
    if (!t.ids.empty() && t.ids[k] == Vocabulary::kPad)
      throw Error("PadInSequence", "detokenize rejects sequences containing pad entries");
    if (k < t.pad_mask.size() && !t.pad_mask[k])
      throw Error("PadInSequence", "detokenize rejects sequences containing pad entries");
    out += t.tokens[k];
  }
  return out;
}

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_["<pad>"] = kPad;
  token_to_id_["<unk>"] = kUnknown;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus) {
  std::set<std::string> seen;
  for (const std::string& s : corpus) {
    TokenSequence t = tokenize(s);
    seen.insert(t.tokens.begin(), t.tokens.end());
  }
  std::vector<std::string> sorted(seen.begin(), seen.end());
  return from_tokens(sorted);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& sorted_tokens) {
  Vocabulary v;
  for (const std::string& tok : sorted_tokens) {
    if (v.token_to_id_.count(tok)) continue;
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
    throw Error("IndexOutOfVocab", "id " + std::to_string(id) + " outside vocabulary of size " +
                                       std::to_string(id_to_token_.size()));
  return id_to_token_[id];
}

void Vocabulary::encode(TokenSequence& t, int width) const {
  const int n = t.length();
  if (width > 0 && n > width)
    throw Error("SequenceTooLong", "sequence of length " + std::to_string(n) +
                                       " exceeds width " + std::to_string(width));
  const int total = width > 0 ? width : n;
  t.ids.assign(total, kPad);
  t.pad_mask.assign(total, 0);
  for (int k = 0; k < n; ++k) {
    t.ids[k] = id_of(t.tokens[k]);
    t.pad_mask[k] = 1;
  }
}

std::vector<std::string> Vocabulary::tokens() const {
  return std::vector<std::string>(id_to_token_.begin() + 2, id_to_token_.end());
}

}  // namespace pacc::chem
