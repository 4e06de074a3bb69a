#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace evae {

// Dense row-major double tensor with an optional reverse-mode tape entry.
// A Tensor is a cheap shared handle: copies alias the same storage, which is
// exactly what graph edges need. Each operator below produces a fresh node
// holding links to its inputs plus a backward closure; backward() on a
// scalar walks that graph once in reverse topological order, accumulates
// gradients into every node that requires them, and then drops the links so
// intermediates free eagerly while parameters (leaves) survive.
//
// Invariant: every operator validates shapes up front and checks that its
// output is finite, so a tensor obtained from a successful call never holds
// NaN or Inf.
class Tensor {
 public:
  Tensor() = default;  // undefined handle

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t size() const;
  // 2-D accessors; throw DimensionError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  double value() const;  // single-element tensors only
  std::span<const double> data() const;
  // In-place access for parameter updates. Mutating a node that is already
  // recorded as an input of a live graph invalidates that graph.
  std::span<double> mutable_data();

  bool requires_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from a single-element tensor. Populates grad on every
  // reachable node with requires_grad and frees the recorded graph. Calling
  // it again on the same result throws StateError.
  void backward();

 private:
  struct Node;
  std::shared_ptr<Node> node_;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend struct OpAccess;
};

// --- operator set ---------------------------------------------------------
// x:[n,in] w:[in,out] b:[out] -> [n,out]; out[i,j] = sum_k x[i,k] w[k,j] + b[j]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);  // same shape, elementwise
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // same shape, elementwise
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);  // log(1 + e^x), overflow-safe
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);         // domain: strictly positive input
Tensor reciprocal(const Tensor& x);  // domain: nonzero input
Tensor sum(const Tensor& x);         // -> scalar
Tensor mean(const Tensor& x);        // -> scalar
// -(t log p + (1-t) log(1-p)) summed over all elements; p is clamped to
// [1e-12, 1-1e-12] inside the logs so saturated sigmoids stay finite.
Tensor bce_sum(const Tensor& pred, const Tensor& target);

// Scoped switch that stops operators from recording tape entries, for
// evaluation passes that only need values.
class GradGuard {
 public:
  GradGuard();
  ~GradGuard();
  GradGuard(const GradGuard&) = delete;
  GradGuard& operator=(const GradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace evae
