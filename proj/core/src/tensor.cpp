#include "evae/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_set>

#include "evae/errors.hpp"

namespace evae {

namespace {
thread_local bool g_tape_enabled = true;

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

struct Tensor::Node {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives this node's grad and adds contributions into parents' grads.
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

struct OpAccess {
  using Node = Tensor::Node;
  static const std::shared_ptr<Tensor::Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Tensor::Node> n) { return Tensor(std::move(n)); }
};

namespace {

using Node = OpAccess::Node;

constexpr double kBceEps = 1e-12;

std::shared_ptr<Node> require_defined(const Tensor& t, const char* op) {
  const auto& n = OpAccess::node(t);
  if (!n) throw StateError(std::string(op) + ": undefined tensor");
  return n;
}

void check_finite(const std::vector<double>& data, const char* op) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced non-finite value");
  }
}

// Builds the result node; records parents and the backward closure only when
// the tape is on and some input participates in the graph.
Tensor make_op(const char* name, std::vector<std::size_t> shape, std::vector<double> data,
               std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> backprop) {
  check_finite(data, name);
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  bool track = false;
  if (g_tape_enabled) {
    for (const auto& p : parents) track = track || p->requires_grad;
  }
  if (track) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
  }
  return OpAccess::wrap(std::move(out));
}

void require_same_shape(const Node& a, const Node& b, const char* op) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
  }
}

// Elementwise helper: out = f(x), dx += g * dfdx(x, out). Templated so the
// per-element calls inline instead of going through std::function.
template <typename F, typename DFDX>
Tensor unary_map(const char* name, const Tensor& xt, F f, DFDX dfdx_of_x_and_y) {
  auto x = require_defined(xt, name);
  std::vector<double> out(x->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x->data[i]);
  auto backprop = [x, dfdx_of_x_and_y](Node& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      x->grad[i] += self.grad[i] * dfdx_of_x_and_y(x->data[i], self.data[i]);
    }
  };
  return make_op(name, x->shape, std::move(out), {x}, backprop);
}

}  // namespace

// --- construction and accessors -------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  if (!std::isfinite(value)) throw NumericError("Tensor::full: non-finite fill value");
  auto n = std::make_shared<Node>();
  n->data.assign(shape_size(shape), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("Tensor::from_data: " + std::to_string(data.size()) +
                         " values for shape " + shape_str(shape));
  }
  check_finite(data, "Tensor::from_data");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const std::vector<std::size_t>& Tensor::shape() const {
  return require_defined(*this, "shape")->shape;
}

std::size_t Tensor::size() const { return require_defined(*this, "size")->data.size(); }

std::size_t Tensor::rows() const {
  auto n = require_defined(*this, "rows");
  if (n->shape.size() != 2) throw DimensionError("rows: tensor is not 2-D");
  return n->shape[0];
}

std::size_t Tensor::cols() const {
  auto n = require_defined(*this, "cols");
  if (n->shape.size() != 2) throw DimensionError("cols: tensor is not 2-D");
  return n->shape[1];
}

double Tensor::value() const {
  auto n = require_defined(*this, "value");
  if (n->data.size() != 1) {
    throw DimensionError("value: tensor has " + std::to_string(n->data.size()) + " elements");
  }
  return n->data[0];
}

std::span<const double> Tensor::data() const {
  auto n = require_defined(*this, "data");
  return {n->data.data(), n->data.size()};
}

std::span<double> Tensor::mutable_data() {
  auto n = require_defined(*this, "mutable_data");
  return {n->data.data(), n->data.size()};
}

bool Tensor::requires_grad() const { return require_defined(*this, "requires_grad")->requires_grad; }

std::span<const double> Tensor::grad() const {
  auto n = require_defined(*this, "grad");
  n->ensure_grad();
  return {n->grad.data(), n->grad.size()};
}

std::span<double> Tensor::mutable_grad() {
  auto n = require_defined(*this, "mutable_grad");
  n->ensure_grad();
  return {n->grad.data(), n->grad.size()};
}

void Tensor::zero_grad() {
  auto n = require_defined(*this, "zero_grad");
  n->ensure_grad();
  std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

void Tensor::backward() {
  auto root = require_defined(*this, "backward");
  if (root->data.size() != 1) throw DimensionError("backward: root must be a single element");
  if (root->backward_done) throw StateError("backward: graph already consumed for this result");
  if (!root->requires_grad) {
    throw StateError("backward: result does not depend on any differentiable input");
  }

  // Iterative post-order DFS: children (parents in graph terms) first.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
  }
  // Free the recorded graph; leaves keep their accumulated grads.
  for (Node* node : order) {
    node->parents.clear();
    node->backprop = nullptr;
  }
  root->backward_done = true;
}

// --- operators -------------------------------------------------------------

Tensor affine(const Tensor& xt, const Tensor& wt, const Tensor& bt) {
  auto x = require_defined(xt, "affine");
  auto w = require_defined(wt, "affine");
  auto b = require_defined(bt, "affine");
  if (x->shape.size() != 2 || w->shape.size() != 2 || b->shape.size() != 1) {
    throw DimensionError("affine: expects x[n,in], w[in,out], b[out]");
  }
  const std::size_t n = x->shape[0], in = x->shape[1], out_dim = w->shape[1];
  if (w->shape[0] != in || b->shape[0] != out_dim) {
    throw DimensionError("affine: x" + shape_str(x->shape) + " w" + shape_str(w->shape) + " b" +
                         shape_str(b->shape) + " do not chain");
  }

  std::vector<double> out(n * out_dim);
  {
    CMatMap X(x->data.data(), n, in);
    CMatMap W(w->data.data(), in, out_dim);
    MatMap O(out.data(), n, out_dim);
    O.noalias() = X * W;
    Eigen::Map<const Eigen::RowVectorXd> bias(b->data.data(), out_dim);
    O.rowwise() += bias;
  }

  auto backprop = [x, w, b, n, in, out_dim](Node& self) {
    CMatMap G(self.grad.data(), n, out_dim);
    if (x->requires_grad) {
      x->ensure_grad();
      MatMap GX(x->grad.data(), n, in);
      CMatMap W(w->data.data(), in, out_dim);
      GX.noalias() += G * W.transpose();
    }
    if (w->requires_grad) {
      w->ensure_grad();
      MatMap GW(w->grad.data(), in, out_dim);
      CMatMap X(x->data.data(), n, in);
      GW.noalias() += X.transpose() * G;
    }
    if (b->requires_grad) {
      b->ensure_grad();
      Eigen::Map<Eigen::RowVectorXd> GB(b->grad.data(), out_dim);
      GB.noalias() += G.colwise().sum();
    }
  };
  return make_op("affine", {n, out_dim}, std::move(out), {x, w, b}, backprop);
}

Tensor add(const Tensor& at, const Tensor& bt) {
  auto a = require_defined(at, "add");
  auto b = require_defined(bt, "add");
  require_same_shape(*a, *b, "add");
  std::vector<double> out(a->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
  auto backprop = [a, b](Node& self) {
    for (const auto& p : {a, b}) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  };
  return make_op("add", a->shape, std::move(out), {a, b}, backprop);
}

Tensor sub(const Tensor& at, const Tensor& bt) {
  auto a = require_defined(at, "sub");
  auto b = require_defined(bt, "sub");
  require_same_shape(*a, *b, "sub");
  std::vector<double> out(a->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
  auto backprop = [a, b](Node& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) b->grad[i] -= self.grad[i];
    }
  };
  return make_op("sub", a->shape, std::move(out), {a, b}, backprop);
}

Tensor mul(const Tensor& at, const Tensor& bt) {
  auto a = require_defined(at, "mul");
  auto b = require_defined(bt, "mul");
  require_same_shape(*a, *b, "mul");
  std::vector<double> out(a->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
  auto backprop = [a, b](Node& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i] * b->data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) b->grad[i] += self.grad[i] * a->data[i];
    }
  };
  return make_op("mul", a->shape, std::move(out), {a, b}, backprop);
}

Tensor scale(const Tensor& xt, double c) {
  if (!std::isfinite(c)) throw NumericError("scale: non-finite factor");
  return unary_map(
      "scale", xt, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& xt, double c) {
  if (!std::isfinite(c)) throw NumericError("add_scalar: non-finite addend");
  return unary_map(
      "add_scalar", xt, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& xt) {
  return unary_map(
      "relu", xt, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& xt) {
  return unary_map(
      "sigmoid", xt,
      [](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& xt) {
  return unary_map(
      "softplus", xt,
      [](double v) {
        // log(1+e^v) = max(v,0) + log1p(e^{-|v|})
        return (v > 0.0 ? v : 0.0) + std::log1p(std::exp(-std::abs(v)));
      },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor exp(const Tensor& xt) {
  return unary_map(
      "exp", xt, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& xt) {
  auto x = require_defined(xt, "log");
  for (double v : x->data) {
    if (v <= 0.0) throw DomainError("log: input not strictly positive");
  }
  return unary_map(
      "log", xt, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor reciprocal(const Tensor& xt) {
  auto x = require_defined(xt, "reciprocal");
  for (double v : x->data) {
    if (v == 0.0) throw DomainError("reciprocal: input touches zero");
  }
  return unary_map(
      "reciprocal", xt, [](double v) { return 1.0 / v; },
      [](double, double y) { return -y * y; });
}

Tensor sum(const Tensor& xt) {
  auto x = require_defined(xt, "sum");
  double acc = 0.0;
  for (double v : x->data) acc += v;
  auto backprop = [x](Node& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self.grad[0];
  };
  return make_op("sum", {1}, {acc}, {x}, backprop);
}

Tensor mean(const Tensor& xt) {
  auto x = require_defined(xt, "mean");
  if (x->data.empty()) throw DimensionError("mean: empty tensor");
  double acc = 0.0;
  for (double v : x->data) acc += v;
  const double inv = 1.0 / static_cast<double>(x->data.size());
  auto backprop = [x, inv](Node& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self.grad[0] * inv;
  };
  return make_op("mean", {1}, {acc * inv}, {x}, backprop);
}

Tensor bce_sum(const Tensor& pt, const Tensor& tt) {
  auto p = require_defined(pt, "bce_sum");
  auto t = require_defined(tt, "bce_sum");
  require_same_shape(*p, *t, "bce_sum");
  for (double v : t->data) {
    if (v < 0.0 || v > 1.0) throw DomainError("bce_sum: target outside [0,1]");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p->data.size(); ++i) {
    const double pc = std::clamp(p->data[i], kBceEps, 1.0 - kBceEps);
    acc -= t->data[i] * std::log(pc) + (1.0 - t->data[i]) * std::log(1.0 - pc);
  }
  auto backprop = [p, t](Node& self) {
    const double g = self.grad[0];
    if (p->requires_grad) {
      p->ensure_grad();
      for (std::size_t i = 0; i < p->data.size(); ++i) {
        const double pc = std::clamp(p->data[i], kBceEps, 1.0 - kBceEps);
        p->grad[i] += g * (pc - t->data[i]) / (pc * (1.0 - pc));
      }
    }
    if (t->requires_grad) {
      t->ensure_grad();
      for (std::size_t i = 0; i < t->data.size(); ++i) {
        const double pc = std::clamp(p->data[i], kBceEps, 1.0 - kBceEps);
        t->grad[i] += g * std::log((1.0 - pc) / pc);
      }
    }
  };
  return make_op("bce_sum", {1}, {acc}, {p, t}, backprop);
}

GradGuard::GradGuard() : previous_(g_tape_enabled) { g_tape_enabled = false; }
GradGuard::~GradGuard() { g_tape_enabled = previous_; }

}  // namespace evae
