#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tricir/core/common.hpp"

namespace tricir::nn {

class ShapeMismatch : public std::runtime_error {
 public:
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

class NonScalarLoss : public std::runtime_error {
 public:
  explicit NonScalarLoss(const std::string& msg) : std::runtime_error(msg) {}
};

class NonFiniteValue : public std::runtime_error {
 public:
  explicit NonFiniteValue(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename S>
class Tape;

// Lightweight handle to a tape node.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  const MatR<S>& value() const { return tape->value(id); }
  const MatR<S>& grad() const { return tape->grad(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape->requires_grad(id); }
};

// Reverse-mode tape. Nodes are created in forward order (creation order is a
// topological order); backward() walks ids in reverse, so each node sees its
// full incoming gradient before propagating. Repeated backward() calls
// accumulate gradients until zero_grad().
template <typename S>
class Tape {
 public:
  using Mat = MatR<S>;

  struct Node {
    Mat value;                       // owned storage (unused when external)
    const Mat* extern_value = nullptr;
    Mat grad;                        // lazily allocated
    Mat* extern_grad = nullptr;      // parameter gradients accumulate here
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  // Owned constant; no gradient tracking.
  Var<S> constant(Mat v) { return alloc(std::move(v), false); }

  // External constant; the caller keeps `v` alive for the tape's lifetime.
  Var<S> constant_ref(const Mat* v) {
    Node n;
    n.extern_value = v;
    return push(std::move(n));
  }

  // Parameter binding: value and gradient live outside the tape.
  Var<S> leaf(const Mat* value, Mat* grad, bool track) {
    Node n;
    n.extern_value = value;
    n.extern_grad = grad;
    n.requires_grad = track;
    return push(std::move(n));
  }

  Var<S> alloc(Mat v, bool track) {
    if (check_finite_ && !v.allFinite())
      throw NonFiniteValue("non-finite value produced at node " +
                           std::to_string(nodes_.size()));
    Node n;
    n.value = std::move(v);
    n.requires_grad = track;
    return push(std::move(n));
  }

  void set_backward(Var<S> v, std::function<void(Tape&)> fn) {
    nodes_[v.id].backward = std::move(fn);
  }

  const Mat& value(int id) const {
    const Node& n = nodes_[id];
    return n.extern_value ? *n.extern_value : n.value;
  }

  // Gradient slot, allocated and zeroed on first touch.
  Mat& grad(int id) {
    Node& n = nodes_[id];
    if (n.extern_grad) return *n.extern_grad;
    if (n.grad.size() == 0) n.grad = Mat::Zero(value(id).rows(), value(id).cols());
    return n.grad;
  }

  bool has_grad(int id) const {
    const Node& n = nodes_[id];
    return n.extern_grad != nullptr || n.grad.size() != 0;
  }

  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Each call propagates a fresh unit seed; external (parameter) gradients
  // accumulate across calls, tape-local slots are reset per pass.
  void backward(Var<S> loss) {
    if (loss.tape != this) throw std::logic_error("loss from another tape");
    const Mat& lv = value(loss.id);
    if (lv.rows() != 1 || lv.cols() != 1)
      throw NonScalarLoss("backward() needs a 1x1 loss, got " + shape_str(lv));
    zero_grad();
    grad(loss.id)(0, 0) += S(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backward) continue;
      if (!has_grad(id)) continue;  // not on any path to the loss
      n.backward(*this);
    }
  }

  // Clears tape-local gradients; parameter gradients are owned by the store.
  void zero_grad() {
    for (Node& n : nodes_)
      if (n.grad.size() != 0) n.grad.setZero();
  }

  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }
  std::size_t size() const { return nodes_.size(); }

  static std::string shape_str(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

 private:
  Var<S> push(Node n) {
    nodes_.push_back(std::move(n));
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

}  // namespace tricir::nn
