#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "pacc/error.hpp"

namespace pacc::nn {

enum class Mode { kTrain, kEval };
enum class Activation { kLinear, kSigmoid, kRelu, kTanh };

// Value node of the computation graph. Gradients live next to the values;
// grad is allocated (zeroed) only when requires_grad is set.
template <typename S>
struct TensorData {
  std::vector<int> shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool requires_grad = false;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }

  int dim(int k) const { return shape[static_cast<size_t>(k)]; }

  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

template <typename S>
using Tensor = std::shared_ptr<TensorData<S>>;

inline int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

// Wengert-list reverse-mode tape. Ops execute forward eagerly and push a
// backward closure; backward() replays the tape in reverse. Graph
// construction is single-threaded by contract, so recording order is a
// valid topological order.
template <typename S>
class Graph {
 public:
  Tensor<S> make(std::vector<int> shape, bool requires_grad = true) {
    auto t = std::make_shared<TensorData<S>>();
    int64_t n = shape_numel(shape);
    t->shape = std::move(shape);
    t->value.assign(static_cast<size_t>(n), S(0));
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(static_cast<size_t>(n), S(0));
    return t;
  }

  Tensor<S> leaf(std::vector<int> shape, std::vector<S> values, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
      throw Error("ShapeMismatch", "leaf value count does not match shape");
    auto t = std::make_shared<TensorData<S>>();
    t->shape = std::move(shape);
    t->value = std::move(values);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(t->value.size(), S(0));
    return t;
  }

  void record(std::function<void()> backward) { tape_.push_back(std::move(backward)); }

  // Seeds root->grad with ones and replays the tape. The root is typically
  // a scalar loss; seeding a non-scalar computes a sum-of-outputs gradient.
  void backward(const Tensor<S>& root) {
    if (!root->requires_grad)
      throw Error("NoGradient", "backward root does not require gradients");
    std::fill(root->grad.begin(), root->grad.end(), S(1));
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  size_t size() const { return tape_.size(); }
  void clear() { tape_.clear(); }

 private:
  std::vector<std::function<void()>> tape_;
};

// Parameter with a stable name, used for checkpoints and gradient reports.
template <typename S>
struct NamedTensor {
  std::string name;
  Tensor<S> tensor;
};

}  // namespace pacc::nn
