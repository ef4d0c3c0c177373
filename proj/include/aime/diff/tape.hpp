#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>
#include <vector>

#include "aime/common/errors.hpp"

namespace aime::diff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tape;

/// Handle to a value recorded on a Tape. Values are dense 64-bit matrices;
/// column vectors are d x 1, batched values put one batch element per column.
/// Handles are cheap to copy and are invalidated by Tape::clear().
class Array {
 public:
  Array() = default;

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  /// Accumulated gradient; empty matrix if this node was never on a backward path.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// True if gradients propagate into this node's ancestors.
  bool tracked() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Array(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Wengert-list reverse-mode tape. Nodes are appended in evaluation order, so
/// parents always precede children and backward() is a single reverse sweep.
/// Gradients are summed across all uses of a value.
class Tape {
 public:
  /// fn(tape, self_id, upstream) accumulates upstream into the parents' grads.
  using BackwardFn = std::function<void(Tape&, int, const Matrix&)>;

  /// Records a value that does not require gradients (data, noise, frozen weights).
  Array constant(Matrix v) { return push(std::move(v), false, {}); }

  /// Records a differentiable input (parameter or optimization variable).
  Array leaf(Matrix v) { return push(std::move(v), true, {}); }

  /// Records an op result. `tracked` should be true iff any parent is tracked;
  /// the backward fn is dropped for untracked nodes.
  Array make(Matrix v, bool tracked, BackwardFn fn) {
    return push(std::move(v), tracked, tracked ? std::move(fn) : BackwardFn{});
  }

  /// Reverse sweep from a scalar (1x1) root. One sweep per forward build;
  /// repeated calls keep accumulating into the same gradients.
  void backward(const Array& root) {
    if (root.tape_ != this) throw ShapeError("backward: root from another tape");
    const Node& r = nodes_[static_cast<std::size_t>(root.id_)];
    if (r.value.rows() != 1 || r.value.cols() != 1) {
      throw ShapeError("backward: root must be a 1x1 scalar");
    }
    if (!r.value.allFinite()) throw NumericalError("backward: root is not finite");
    grad_ref(root.id_)(0, 0) += 1.0;
    for (int id = root.id_; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.tracked || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this, id, n.grad);
    }
  }

  /// Drops all nodes but keeps vector capacity for reuse across steps.
  void clear() { nodes_.clear(); }

  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool tracked(int id) const { return nodes_[static_cast<std::size_t>(id)].tracked; }

  /// Gradient buffer for a node, zero-initialized on first touch.
  Matrix& grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched by backward
    BackwardFn backward;
    bool tracked = false;
  };

  Array push(Matrix v, bool tracked, BackwardFn fn) {
    nodes_.push_back(Node{std::move(v), {}, std::move(fn), tracked});
    return Array(this, static_cast<int>(nodes_.size()) - 1);
  }

  friend class Array;
  std::vector<Node> nodes_;
};

inline const Matrix& Array::value() const { return tape_->nodes_[static_cast<std::size_t>(id_)].value; }

inline const Matrix& Array::grad() const {
  static const Matrix empty;
  const Matrix& g = tape_->nodes_[static_cast<std::size_t>(id_)].grad;
  return g.size() == 0 ? empty : g;
}

inline bool Array::tracked() const { return tape_->tracked(id_); }

}  // namespace aime::diff
