#pragma once

// Minimal reverse-mode differentiation over dense float64 matrices.
//
// A Tape records every primitive executed during a forward pass together with
// a closure that maps the output adjoint onto the input adjoints. backward()
// replays the closures in exact reverse execution order and deposits leaf
// gradients into the ParamStore the leaves were bound from.

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "progmoe/error.hpp"

namespace progmoe::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named dense parameters with gradient buffers and a flat view for optimizers.
/// Entries keep insertion order; that order defines the flat layout.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;
  };

  std::size_t add(const std::string& name, Matrix init, bool trainable = true);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const;

  Matrix& value(const std::string& name) { return entries_[index(name)].value; }
  const Matrix& value(const std::string& name) const { return entries_[index(name)].value; }
  Matrix& grad(const std::string& name) { return entries_[index(name)].grad; }
  const Matrix& grad(const std::string& name) const { return entries_[index(name)].grad; }

  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void set_trainable(const std::string& name, bool trainable);
  /// Applies `trainable` to every entry whose name starts with `prefix`.
  void set_trainable_prefix(const std::string& prefix, bool trainable);

  std::size_t flat_size() const;
  Vector flatten() const;
  void unflatten(const Vector& flat);
  Vector flatten_grad() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its Tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  /// In strict mode every primitive output is checked for NaN/Inf.
  explicit Tape(bool strict = false) : strict_(strict) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// Leaf whose gradient is retrievable through grad() after backward().
  Var variable(Matrix value);
  /// Leaf bound to a ParamStore entry; backward() accumulates into entry.grad.
  Var param(ParamStore& store, std::size_t index);
  /// Binds every entry of `store`, in store order.
  std::vector<Var> bind(ParamStore& store);

  /// Primitive hook: records `value` and, when any input carries a gradient,
  /// the closure that propagates the node's adjoint to its inputs.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  void backward(Var output, const Matrix& upstream);
  void backward(Var scalar_output);

  /// Adjoint of `v` after backward(); zero matrix if nothing reached it.
  Matrix grad(Var v) const;

  /// Adds `g` into the adjoint of node `v`. Used by primitive closures.
  void accumulate(Var v, const Matrix& g);
  bool needs_grad(Var v) const { return nodes_[v.id_].needs_grad; }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  bool strict() const { return strict_; }

  /// Node ids whose closures ran during the last backward(), in visiting order.
  const std::vector<int>& backward_order() const { return backward_order_; }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
    ParamStore* store = nullptr;
    std::size_t param_index = 0;
  };

  std::deque<Node> nodes_;  // deque: node references stay valid while recording
  std::vector<int> backward_order_;
  bool strict_ = false;
  bool consumed_ = false;
};

// Primitives. Shapes follow Eigen conventions; mismatches throw ShapeMismatch.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// m (r x c) plus a 1 x c row vector broadcast over rows.
Var add_row_bias(Var m, Var bias);
Var scale(Var a, double s);
/// a times a 1 x 1 variable.
Var scale(Var a, Var s);
Var hadamard(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var relu(Var a);
/// Elementwise square root; the adjoint at exactly 0 is taken as 0.
Var sqrt(Var a);
/// Row-wise softmax.
Var softmax(Var a);
/// Sum of all entries, as a 1 x 1 node.
Var reduce_sum(Var a);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
/// Divides every row by its sum. Rows must have positive sums.
Var row_normalize(Var a);
/// Single entry of `a` as a 1 x 1 node.
Var element(Var a, Eigen::Index r, Eigen::Index c);

/// out.row(i) = a.row(index[i]).
Var gather_rows(Var a, const std::vector<Eigen::Index>& index);
/// out.row(target[i]) += weight[i] * a.row(i), with `rows` output rows.
Var segment_sum(Var a, const std::vector<Eigen::Index>& target, const std::vector<double>& weight,
                Eigen::Index rows);

Var dot(Var a, Var b);
Var sum(const std::vector<Var>& terms);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

}  // namespace progmoe::ad
