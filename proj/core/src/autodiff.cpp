#include "progmoe/autodiff.hpp"

#include <cmath>
#include <sstream>

namespace progmoe::ad {

namespace {

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(op) + ": " + shape_of(a.value()) + " vs " + shape_of(b.value()));
  }
}

void require_scalar(const char* op, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": expected 1x1, got " + shape_of(s.value()));
  }
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw Error(ErrorKind::ShapeMismatch, "operation on an unbound Var");
  return *a.tape();
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------- ParamStore

std::size_t ParamStore::add(const std::string& name, Matrix init, bool trainable) {
  if (contains(name)) throw Error(ErrorKind::InvalidConfig, "duplicate parameter name '" + name + "'");
  Entry e;
  e.name = name;
  e.grad = Matrix::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  e.trainable = trainable;
  entries_.push_back(std::move(e));
  index_[name] = entries_.size() - 1;
  return entries_.size() - 1;
}

std::size_t ParamStore::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::InvalidConfig, "unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::set_trainable(const std::string& name, bool trainable) {
  entries_[index(name)].trainable = trainable;
}

void ParamStore::set_trainable_prefix(const std::string& prefix, bool trainable) {
  for (auto& e : entries_) {
    if (e.name.rfind(prefix, 0) == 0) e.trainable = trainable;
  }
}

std::size_t ParamStore::flat_size() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += static_cast<std::size_t>(e.value.size());
  return total;
}

Vector ParamStore::flatten() const {
  Vector flat(static_cast<Eigen::Index>(flat_size()));
  Eigen::Index off = 0;
  for (const auto& e : entries_) {
    // Row-major element order, matching the checkpoint layout.
    for (Eigen::Index r = 0; r < e.value.rows(); ++r)
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) flat[off++] = e.value(r, c);
  }
  return flat;
}

void ParamStore::unflatten(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != flat_size()) {
    throw Error(ErrorKind::ShapeMismatch, "unflatten: length " + std::to_string(flat.size()) +
                                              " != " + std::to_string(flat_size()));
  }
  Eigen::Index off = 0;
  for (auto& e : entries_) {
    for (Eigen::Index r = 0; r < e.value.rows(); ++r)
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) e.value(r, c) = flat[off++];
  }
}

Vector ParamStore::flatten_grad() const {
  Vector flat(static_cast<Eigen::Index>(flat_size()));
  Eigen::Index off = 0;
  for (const auto& e : entries_) {
    for (Eigen::Index r = 0; r < e.grad.rows(); ++r)
      for (Eigen::Index c = 0; c < e.grad.cols(); ++c) flat[off++] = e.grad(r, c);
  }
  return flat;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero(e.value.rows(), e.value.cols());
}

// ---------------------------------------------------------------------- Var

const Matrix& Var::value() const {
  if (!tape_) throw Error(ErrorKind::ShapeMismatch, "value() on an unbound Var");
  return tape_->nodes_[static_cast<std::size_t>(id_)].value;
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw Error(ErrorKind::ShapeMismatch, "scalar() on " + shape_of(v));
  return v(0, 0);
}

// --------------------------------------------------------------------- Tape

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(ParamStore& store, std::size_t index) {
  Node n;
  n.value = store.entry(index).value;
  n.needs_grad = true;
  n.store = &store;
  n.param_index = index;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::vector<Var> Tape::bind(ParamStore& store) {
  std::vector<Var> vars;
  vars.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) vars.push_back(param(store, i));
  return vars;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  if (consumed_) throw Error(ErrorKind::TapeConsumed, "recording on a tape after backward()");
  if (strict_ && !value.allFinite()) {
    throw Error(ErrorKind::NonFiniteDetected, "primitive produced a non-finite value at node " +
                                                  std::to_string(nodes_.size()));
  }
  bool any = false;
  for (const Var& in : inputs) any = any || nodes_[static_cast<std::size_t>(in.id_)].needs_grad;
  Node n;
  n.value = std::move(value);
  n.needs_grad = any;
  if (any) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id_)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var output, const Matrix& upstream) {
  if (consumed_) throw Error(ErrorKind::TapeConsumed, "backward() called twice on the same tape");
  if (output.tape_ != this) throw Error(ErrorKind::ShapeMismatch, "backward(): output is from another tape");
  if (upstream.rows() != output.rows() || upstream.cols() != output.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "backward(): upstream " + shape_of(upstream) + " vs output " +
                                              shape_of(output.value()));
  }
  consumed_ = true;
  backward_order_.clear();
  accumulate(output, upstream);
  for (int id = output.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      backward_order_.push_back(id);
      // Closures only write to earlier nodes, so n.grad is stable here.
      n.backward(*this, n.grad);
    } else if (n.store != nullptr) {
      n.store->entry(n.param_index).grad += n.grad;
    }
  }
}

void Tape::backward(Var scalar_output) {
  backward(scalar_output, Matrix::Ones(scalar_output.rows(), scalar_output.cols()));
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id_)];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// --------------------------------------------------------------- primitives

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "matmul: " + shape_of(a.value()) + " * " + shape_of(b.value()));
  }
  Tape& t = tape_of(a);
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.needs_grad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.needs_grad(b)) tp.accumulate(b, -g);
  });
}

Var add_row_bias(Var m, Var bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    throw Error(ErrorKind::ShapeMismatch,
                "add_row_bias: " + shape_of(m.value()) + " + " + shape_of(bias.value()));
  }
  Tape& t = tape_of(m);
  Matrix out = m.value().rowwise() + bias.value().row(0);
  return t.record(std::move(out), {m, bias}, [m, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(m, g);
    if (tp.needs_grad(bias)) tp.accumulate(bias, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, g * s); });
}

Var scale(Var a, Var s) {
  require_scalar("scale", s);
  Tape& t = tape_of(a);
  return t.record(a.value() * s.scalar(), {a, s}, [a, s](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g * s.scalar());
    if (tp.needs_grad(s)) tp.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape("hadamard", a, b);
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().array().tanh().matrix();
  Matrix dy = (1.0 - y.array().square()).matrix();
  return t.record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(dy));
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  Matrix dy = (y.array() * (1.0 - y.array())).matrix();
  return t.record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(dy));
  });
}

Var softplus(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().unaryExpr([](double x) { return stable_softplus(x); });
  return t.record(std::move(y), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(a.value().unaryExpr([](double x) { return stable_sigmoid(x); })));
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseMax(0.0), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; })));
  });
}

Var sqrt(Var a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().cwiseSqrt();
  return t.record(y, {a}, [a, y](Tape& tp, const Matrix& g) {
    Matrix d = y.unaryExpr([](double v) { return v > 0.0 ? 0.5 / v : 0.0; });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - mx).exp().matrix();
    y.row(r) = e / e.sum();
  }
  return t.record(y, {a}, [a, y](Tape& tp, const Matrix& g) {
    Matrix gx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double inner = g.row(r).dot(y.row(r));
      gx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - inner).matrix());
    }
    tp.accumulate(a, gx);
  });
}

Var reduce_sum(Var a) {
  Tape& t = tape_of(a);
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().transpose(), {a}, [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g.transpose()); });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw Error(ErrorKind::ShapeMismatch, "concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, const Matrix& g) {
    Eigen::Index o = 0;
    for (const Var& p : parts) {
      if (tp.needs_grad(p)) tp.accumulate(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

Var row_normalize(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Eigen::VectorXd s = x.rowwise().sum();
  if ((s.array() <= 0.0).any()) throw Error(ErrorKind::NonFiniteDetected, "row_normalize: non-positive row sum");
  Matrix y = s.cwiseInverse().asDiagonal() * x;
  return t.record(y, {a}, [a, y, s](Tape& tp, const Matrix& g) {
    // y_ij = x_ij / s_i  =>  dx_ij = (g_ij - sum_k g_ik y_ik) / s_i
    Eigen::VectorXd inner = g.cwiseProduct(y).rowwise().sum();
    Matrix gx = s.cwiseInverse().asDiagonal() * (g.colwise() - inner);
    tp.accumulate(a, gx);
  });
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "element: index out of range for " + shape_of(a.value()));
  }
  Tape& t = tape_of(a);
  return t.record(Matrix::Constant(1, 1, a.value()(r, c)), {a}, [a, r, c](Tape& tp, const Matrix& g) {
    Matrix gx = Matrix::Zero(a.rows(), a.cols());
    gx(r, c) = g(0, 0);
    tp.accumulate(a, gx);
  });
}

Var gather_rows(Var a, const std::vector<Eigen::Index>& index) {
  Tape& t = tape_of(a);
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw Error(ErrorKind::ShapeMismatch, "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return t.record(std::move(out), {a}, [a, index](Tape& tp, const Matrix& g) {
    Matrix gx = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) gx.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    tp.accumulate(a, gx);
  });
}

Var segment_sum(Var a, const std::vector<Eigen::Index>& target, const std::vector<double>& weight,
                Eigen::Index rows) {
  if (static_cast<Eigen::Index>(target.size()) != a.rows() || weight.size() != target.size()) {
    throw Error(ErrorKind::ShapeMismatch, "segment_sum: target/weight length must equal input rows");
  }
  Tape& t = tape_of(a);
  Matrix out = Matrix::Zero(rows, a.cols());
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] < 0 || target[i] >= rows) throw Error(ErrorKind::ShapeMismatch, "segment_sum: target out of range");
    out.row(target[i]) += weight[i] * a.value().row(static_cast<Eigen::Index>(i));
  }
  return t.record(std::move(out), {a}, [a, target, weight](Tape& tp, const Matrix& g) {
    Matrix gx(a.rows(), a.cols());
    for (std::size_t i = 0; i < target.size(); ++i) gx.row(static_cast<Eigen::Index>(i)) = weight[i] * g.row(target[i]);
    tp.accumulate(a, gx);
  });
}

Var dot(Var a, Var b) { return reduce_sum(hadamard(a, b)); }

Var sum(const std::vector<Var>& terms) {
  if (terms.empty()) throw Error(ErrorKind::ShapeMismatch, "sum: no terms");
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

}  // namespace progmoe::ad
