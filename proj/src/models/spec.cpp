#include "pacc/models/spec.hpp"

#include <cstdio>
#include <sstream>

namespace pacc::models {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kDnn: return "DNN";
    case ModelKind::kBrnn: return "bRNN";
    case ModelKind::kScnn: return "SCNN";
    case ModelKind::kSa: return "SA";
    case ModelKind::kCa: return "CA";
    case ModelKind::kMca: return "MCA";
  }
  return "?";
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "DNN") return ModelKind::kDnn;
  if (name == "bRNN" || name == "BRNN") return ModelKind::kBrnn;
  if (name == "SCNN") return ModelKind::kScnn;
  if (name == "SA") return ModelKind::kSa;
  if (name == "CA") return ModelKind::kCa;
  if (name == "MCA") return ModelKind::kMca;
  throw Error("UnknownModelKind", "'" + name + "' is not one of DNN/bRNN/SCNN/SA/CA/MCA");
}

ModelSpec ModelSpec::defaults_for(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::kDnn:
      s.dense_sizes = {512, 256, 128, 64, 32, 16};
      break;
    case ModelKind::kSa:
    case ModelKind::kCa:
      s.attention_dim = 256;
      break;
    case ModelKind::kMca:
      s.attention_dim = 64;
      s.kernels_per_channel = 64;
      s.heads_per_channel = 4;
      break;
    default:
      break;
  }
  return s;
}

int ModelSpec::head_input_width() const {
  switch (kind) {
    case ModelKind::kDnn: return fingerprint_width + panel_size;
    case ModelKind::kBrnn: return 2 * gru_hidden + panel_size;
    case ModelKind::kScnn: return scnn_channels.back() + panel_size;
    case ModelKind::kSa:
    case ModelKind::kCa: return embedding_dim + panel_size;
    case ModelKind::kMca:
      return static_cast<int>(kernel_widths.size()) * heads_per_channel * kernels_per_channel +
             heads_per_channel * embedding_dim;
  }
  return 0;
}

void ModelSpec::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw Error("InvalidModelSpec", std::string(what) + " must be >= 1");
  };
  positive(panel_size, "panel_size");
  if (p_drop < 0.0 || p_drop >= 1.0)
    throw Error("InvalidModelSpec", "p_drop must lie in [0, 1)");
  if (dense_sizes.empty()) throw Error("InvalidModelSpec", "dense_sizes must not be empty");
  for (int d : dense_sizes) positive(d, "dense size");

  if (kind == ModelKind::kDnn) {
    positive(fingerprint_width, "fingerprint_width");
    return;
  }
  positive(embedding_dim, "embedding_dim");
  positive(vocab_size, "vocab_size");
  positive(max_len, "max_len");
  if (kind == ModelKind::kSa || kind == ModelKind::kCa || kind == ModelKind::kMca)
    positive(attention_dim, "attention_dim");
  if (kind == ModelKind::kMca) {
    positive(kernels_per_channel, "kernels_per_channel");
    positive(heads_per_channel, "heads_per_channel");
    if (kernel_widths.empty()) throw Error("InvalidModelSpec", "kernel_widths empty");
    for (int k : kernel_widths)
      if (k % 2 == 0) throw Error("InvalidModelSpec", "kernel widths must be odd");
  }
  if (kind == ModelKind::kScnn) {
    if (scnn_channels.size() != scnn_widths.size() || scnn_channels.empty())
      throw Error("InvalidModelSpec", "SCNN channels and widths must align");
    for (int k : scnn_widths)
      if (k % 2 == 0) throw Error("InvalidModelSpec", "kernel widths must be odd");
  }
  if (kind == ModelKind::kBrnn) positive(gru_hidden, "gru_hidden");
}

std::string ModelSpec::serialize() const {
  std::ostringstream out;
  char pd[64];
  std::snprintf(pd, sizeof(pd), "%.17g", p_drop);
  out << "kind = " << kind_name(kind) << "\n"
      << "embedding_dim = " << embedding_dim << "\n"
      << "attention_dim = " << attention_dim << "\n"
      << "kernels_per_channel = " << kernels_per_channel << "\n"
      << "heads_per_channel = " << heads_per_channel << "\n"
      << "kernel_widths = " << join_ints(kernel_widths) << "\n"
      << "dense_sizes = " << join_ints(dense_sizes) << "\n"
      << "p_drop = " << pd << "\n"
      << "vocab_size = " << vocab_size << "\n"
      << "panel_size = " << panel_size << "\n"
      << "max_len = " << max_len << "\n"
      << "scnn_channels = " << join_ints(scnn_channels) << "\n"
      << "scnn_widths = " << join_ints(scnn_widths) << "\n"
      << "gru_hidden = " << gru_hidden << "\n"
      << "fingerprint_width = " << fingerprint_width << "\n";
  return out.str();
}

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec s;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("MalformedModelSpec", "missing '=' in line: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "kind") s.kind = kind_from_name(val);
    else if (key == "embedding_dim") s.embedding_dim = std::stoi(val);
    else if (key == "attention_dim") s.attention_dim = std::stoi(val);
    else if (key == "kernels_per_channel") s.kernels_per_channel = std::stoi(val);
    else if (key == "heads_per_channel") s.heads_per_channel = std::stoi(val);
    else if (key == "kernel_widths") s.kernel_widths = split_ints(val);
    else if (key == "dense_sizes") s.dense_sizes = split_ints(val);
    else if (key == "p_drop") s.p_drop = std::stod(val);
    else if (key == "vocab_size") s.vocab_size = std::stoi(val);
    else if (key == "panel_size") s.panel_size = std::stoi(val);
    else if (key == "max_len") s.max_len = std::stoi(val);
    else if (key == "scnn_channels") s.scnn_channels = split_ints(val);
    else if (key == "scnn_widths") s.scnn_widths = split_ints(val);
    else if (key == "gru_hidden") s.gru_hidden = std::stoi(val);
    else if (key == "fingerprint_width") s.fingerprint_width = std::stoi(val);
    else throw Error("MalformedModelSpec", "unknown key '" + key + "'");
  }
  return s;
}

bool ModelSpec::operator==(const ModelSpec& other) const {
  return serialize() == other.serialize();
}

}  // namespace pacc::models
