#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pacc/error.hpp"

namespace pacc::chem {

// Token/id sequence for one SMILES string. ids are empty until a Vocabulary
// encodes the sequence; pad positions carry id 0 and pad_mask 0.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<int> ids;
  std::vector<uint8_t> pad_mask;  // 1 = real token

  int length() const { return static_cast<int>(tokens.size()); }
};

// Regular-expression SMILES tokenization: bracket expressions, two-character
// halogens and %nn ring closures are single tokens, everything else is one
// character. Concatenating the tokens reproduces the input exactly.
TokenSequence tokenize(const std::string& s);

// Inverse of tokenize (plain concatenation). Rejects sequences containing
// pad entries.
std::string detokenize(const TokenSequence& t);

// Token dictionary with reserved entries pad=0 and unknown=1. Construction
// sorts tokens lexicographically so the mapping is deterministic for a given
// corpus.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& corpus);
  static Vocabulary from_tokens(const std::vector<std::string>& sorted_tokens);

  int id_of(const std::string& token) const;  // kUnknown for unseen tokens
  const std::string& token_of(int id) const;
  size_t size() const { return id_to_token_.size(); }

  // Fills ids and pad_mask; pads (or verifies) to `width` when width > 0.
  void encode(TokenSequence& t, int width = 0) const;

  // Non-reserved tokens in id order (for serialization).
  std::vector<std::string> tokens() const;

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace pacc::chem
