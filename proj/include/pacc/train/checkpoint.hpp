#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacc/data/transform.hpp"
#include "pacc/models/encoder.hpp"
#include "pacc/models/spec.hpp"

namespace pacc::train {

// Serialized model state: a text manifest (spec, step, validation RMSE,
// seed, vocabulary, panel, transforms, array table) followed by 32-bit
// IEEE-754 little-endian parameter blobs. Loading reproduces predictions
// bit-identically; blob and manifest hashes guard the container.
struct Checkpoint {
  int format_version = 1;
  models::ModelSpec spec;
  int64_t step = 0;
  double val_rmse = 0.0;
  uint64_t seed = 0;
  std::vector<std::string> vocab_tokens;  // non-reserved tokens in id order
  std::vector<std::string> panel;
  data::LabelTransform label_tf;
  data::ExpressionTransform expr_tf;

  struct Array {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::vector<Array> arrays;

  std::string manifest_text() const;
  uint64_t manifest_hash() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Snapshot of a live model (parameters plus batch-norm running stats).
  static Checkpoint capture(models::Encoder<float>& model, int64_t step, double val_rmse,
                            uint64_t seed, const std::vector<std::string>& vocab_tokens,
                            const std::vector<std::string>& panel,
                            const data::LabelTransform& label_tf,
                            const data::ExpressionTransform& expr_tf);

  // Writes the stored arrays into a model built from the same spec.
  void restore_into(models::Encoder<float>& model) const;
  models::Encoder<float> instantiate() const;
};

uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t seed = 14695981039346656037ull);

}  // namespace pacc::train
