#include "pacc/train/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace pacc::train {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_tab(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += "\t";
    out += v[i];
  }
  return out;
}

std::vector<std::string> split_tab(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  size_t start = 0;
  while (true) {
    size_t tab = s.find('\t', start);
    out.push_back(s.substr(start, tab == std::string::npos ? tab : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += "\t";
    out += fmt_double(v[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  for (const std::string& item : split_tab(s)) out.push_back(std::stod(item));
  return out;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void encode_f32_le(const std::vector<float>& data, std::string& out) {
  for (float f : data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
  }
}

std::vector<float> decode_f32_le(const char* bytes, size_t count) {
  std::vector<float> out(count);
  for (size_t i = 0; i < count; ++i) {
    const unsigned char* b = reinterpret_cast<const unsigned char*>(bytes + 4 * i);
    uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                    (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

}  // namespace

uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string Checkpoint::manifest_text() const {
  std::ostringstream out;
  out << "paccckpt " << format_version << "\n";
  out << "spec_begin\n" << spec.serialize() << "spec_end\n";
  out << "step " << step << "\n";
  out << "val_rmse " << fmt_double(val_rmse) << "\n";
  out << "seed " << seed << "\n";
  out << "vocab " << join_tab(vocab_tokens) << "\n";
  out << "panel " << join_tab(panel) << "\n";
  out << "label_transform " << fmt_double(label_tf.min) << "\t" << fmt_double(label_tf.max)
      << "\n";
  out << "expr_mean " << join_doubles(expr_tf.mean) << "\n";
  out << "expr_std " << join_doubles(expr_tf.stddev) << "\n";
  size_t offset = 0;
  for (const Array& a : arrays) {
    out << "array " << a.name << " " << a.shape.size();
    for (int d : a.shape) out << " " << d;
    out << " " << offset << " " << a.data.size() * 4 << "\n";
    offset += a.data.size() * 4;
  }
  out << "blob_bytes " << offset << "\n";
  return out.str();
}

uint64_t Checkpoint::manifest_hash() const {
  const std::string text = manifest_text();
  return fnv1a_bytes(text.data(), text.size());
}

void Checkpoint::save(const std::string& path) const {
  std::string blobs;
  for (const Array& a : arrays) encode_f32_le(a.data, blobs);

  std::string header = manifest_text();
  header += "blob_hash " + hex64(fnv1a_bytes(blobs.data(), blobs.size())) + "\n";
  header += "manifest_hash " + hex64(manifest_hash()) + "\n";
  header += "end_header\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("FileWriteFailed", "cannot write checkpoint '" + path + "'");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
  if (!out) throw Error("FileWriteFailed", "short write on checkpoint '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotFound", "cannot open checkpoint '" + path + "'");
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::string end_marker = "end_header\n";
  size_t header_end = contents.find(end_marker);
  if (header_end == std::string::npos)
    throw Error("MalformedCheckpoint", "missing end_header marker");
  const size_t blob_start = header_end + end_marker.size();

  Checkpoint ckpt;
  struct ArrayMeta {
    std::string name;
    std::vector<int> shape;
    size_t offset = 0, bytes = 0;
  };
  std::vector<ArrayMeta> metas;
  size_t blob_bytes = 0;
  uint64_t stored_blob_hash = 0, stored_manifest_hash = 0;
  bool have_blob_hash = false, have_manifest_hash = false;

  std::istringstream hs(contents.substr(0, header_end));
  std::string line;
  if (!std::getline(hs, line) || line.rfind("paccckpt ", 0) != 0)
    throw Error("MalformedCheckpoint", "bad magic line");
  ckpt.format_version = std::stoi(line.substr(9));
  if (ckpt.format_version != 1)
    throw Error("MalformedCheckpoint",
                "unsupported format version " + std::to_string(ckpt.format_version));

  std::string spec_text;
  while (std::getline(hs, line)) {
    if (line == "spec_begin") {
      while (std::getline(hs, line) && line != "spec_end") spec_text += line + "\n";
      ckpt.spec = models::ModelSpec::parse(spec_text);
      continue;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    auto rest = [&]() {
      const size_t pos = line.find(' ');
      return pos == std::string::npos ? std::string() : line.substr(pos + 1);
    };
    if (tag == "step") ckpt.step = std::stoll(rest());
    else if (tag == "val_rmse") ckpt.val_rmse = std::stod(rest());
    else if (tag == "seed") ckpt.seed = std::stoull(rest());
    else if (tag == "vocab") ckpt.vocab_tokens = split_tab(rest());
    else if (tag == "panel") ckpt.panel = split_tab(rest());
    else if (tag == "label_transform") {
      auto vals = split_doubles(rest());
      if (vals.size() != 2) throw Error("MalformedCheckpoint", "bad label_transform line");
      ckpt.label_tf.min = vals[0];
      ckpt.label_tf.max = vals[1];
      ckpt.label_tf.fitted = true;
    } else if (tag == "expr_mean") {
      ckpt.expr_tf.mean = split_doubles(rest());
    } else if (tag == "expr_std") {
      ckpt.expr_tf.stddev = split_doubles(rest());
      ckpt.expr_tf.fitted = true;
    } else if (tag == "array") {
      ArrayMeta m;
      int ndim = 0;
      ls >> m.name >> ndim;
      m.shape.resize(ndim);
      for (int d = 0; d < ndim; ++d) ls >> m.shape[d];
      ls >> m.offset >> m.bytes;
      if (!ls) throw Error("MalformedCheckpoint", "bad array line: " + line);
      metas.push_back(std::move(m));
    } else if (tag == "blob_bytes") {
      blob_bytes = std::stoull(rest());
    } else if (tag == "blob_hash") {
      stored_blob_hash = std::stoull(rest(), nullptr, 16);
      have_blob_hash = true;
    } else if (tag == "manifest_hash") {
      stored_manifest_hash = std::stoull(rest(), nullptr, 16);
      have_manifest_hash = true;
    } else {
      throw Error("MalformedCheckpoint", "unknown header line: " + line);
    }
  }

  if (!have_blob_hash || !have_manifest_hash)
    throw Error("MalformedCheckpoint", "missing integrity hashes");
  if (contents.size() - blob_start != blob_bytes)
    throw Error("MalformedCheckpoint", "blob section size disagrees with the manifest");
  const char* blobs = contents.data() + blob_start;
  if (fnv1a_bytes(blobs, blob_bytes) != stored_blob_hash)
    throw Error("ChecksumMismatch", "blob hash mismatch in '" + path + "'");

  for (const ArrayMeta& m : metas) {
    if (m.offset + m.bytes > blob_bytes)
      throw Error("MalformedCheckpoint", "array '" + m.name + "' exceeds the blob section");
    Array a;
    a.name = m.name;
    a.shape = m.shape;
    a.data = decode_f32_le(blobs + m.offset, m.bytes / 4);
    ckpt.arrays.push_back(std::move(a));
  }

  if (ckpt.manifest_hash() != stored_manifest_hash)
    throw Error("ChecksumMismatch", "manifest hash mismatch in '" + path + "'");
  return ckpt;
}

Checkpoint Checkpoint::capture(models::Encoder<float>& model, int64_t step, double val_rmse,
                               uint64_t seed, const std::vector<std::string>& vocab_tokens,
                               const std::vector<std::string>& panel,
                               const data::LabelTransform& label_tf,
                               const data::ExpressionTransform& expr_tf) {
  Checkpoint ckpt;
  ckpt.spec = model.spec();
  ckpt.step = step;
  ckpt.val_rmse = val_rmse;
  ckpt.seed = seed;
  ckpt.vocab_tokens = vocab_tokens;
  ckpt.panel = panel;
  ckpt.label_tf = label_tf;
  ckpt.expr_tf = expr_tf;
  for (const auto& p : model.parameters())
    ckpt.arrays.push_back({p.name, p.tensor->shape, p.tensor->value});
  for (const auto& b : model.buffers())
    ckpt.arrays.push_back({b.name, {static_cast<int>(b.data->size())}, *b.data});
  return ckpt;
}

void Checkpoint::restore_into(models::Encoder<float>& model) const {
  std::map<std::string, const Array*> by_name;
  for (const Array& a : arrays) by_name[a.name] = &a;
  auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw Error("MissingArray", "checkpoint lacks array '" + name + "'");
    const Array* a = it->second;
    by_name.erase(it);
    return a;
  };
  for (auto& p : model.parameters()) {
    const Array* a = take(p.name);
    if (a->shape != p.tensor->shape)
      throw Error("ShapeMismatch", "array '" + p.name + "' shape disagrees with the model");
    p.tensor->value = a->data;
  }
  for (auto& b : model.buffers()) {
    const Array* a = take(b.name);
    if (a->data.size() != b.data->size())
      throw Error("ShapeMismatch", "buffer '" + b.name + "' length disagrees with the model");
    *b.data = a->data;
  }
  if (!by_name.empty())
    throw Error("MalformedCheckpoint",
                "checkpoint carries unknown array '" + by_name.begin()->first + "'");
}

models::Encoder<float> Checkpoint::instantiate() const {
  RngStream rng(0);  // throwaway init; every array is overwritten
  models::Encoder<float> model(spec, rng);
  restore_into(model);
  return model;
}

}  // namespace pacc::train
