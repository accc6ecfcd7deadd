#pragma once

#include <string>
#include <vector>

#include "pacc/error.hpp"

namespace pacc::models {

enum class ModelKind { kDnn, kBrnn, kScnn, kSa, kCa, kMca };

std::string kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);

// Declarative encoder configuration. Serializes to key = value lines and is
// embedded verbatim in checkpoints.
struct ModelSpec {
  ModelKind kind = ModelKind::kMca;
  int embedding_dim = 16;          // H
  int attention_dim = 64;          // A
  int kernels_per_channel = 64;    // f (MCA conv channels)
  int heads_per_channel = 4;       // m (MCA heads per channel)
  std::vector<int> kernel_widths = {3, 5, 11};
  std::vector<int> dense_sizes = {512, 128, 64};
  double p_drop = 0.5;
  int vocab_size = 0;
  int panel_size = 0;              // |G|
  int max_len = 0;                 // T
  std::vector<int> scnn_channels = {32, 32, 32, 16};
  std::vector<int> scnn_widths = {5, 5, 5, 5};
  int gru_hidden = 64;
  int fingerprint_width = 512;

  void validate() const;
  std::string serialize() const;
  static ModelSpec parse(const std::string& text);

  // Published per-architecture defaults: DNN stack [512,256,128,64,32,16],
  // A = 256 for SA/CA, A = f = 64 with m = 4 for MCA.
  static ModelSpec defaults_for(ModelKind kind);

  // Width of the concatenated representation entering the dense stack.
  int head_input_width() const;

  bool operator==(const ModelSpec& other) const;
};

}  // namespace pacc::models
