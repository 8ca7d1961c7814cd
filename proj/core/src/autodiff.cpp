#include "tcl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace tcl::ad {

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw std::invalid_argument("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw std::invalid_argument("operands recorded on different tapes");
  return t;
}

bool needs_grad(Tape& t, std::initializer_list<int> ids) {
  if (!t.grad_enabled()) return false;
  return std::any_of(ids.begin(), ids.end(), [&](int id) { return t.requires_grad(id); });
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

// Softmax over visible entries of each row; masked entries and fully masked
// rows come out as exact zeros.
void masked_softmax_rows(const Matrix& scores, const Matrix* mask, Matrix& out) {
  out.setZero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Real max_score = -std::numeric_limits<Real>::infinity();
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (mask && is_masked((*mask)(i, j))) continue;
      max_score = std::max(max_score, scores(i, j));
    }
    if (max_score == -std::numeric_limits<Real>::infinity()) continue;
    Real total = 0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (mask && is_masked((*mask)(i, j))) continue;
      const Real e = std::exp(scores(i, j) - max_score);
      out(i, j) = e;
      total += e;
    }
    out.row(i) /= total;
  }
}

// dS = P * (dP - rowsum(dP * P))
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs) {
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> dot = (grad_probs.array() * probs.array()).rowwise().sum();
  Matrix out = grad_probs;
  out.colwise() -= dot;
  return (out.array() * probs.array()).matrix();
}

void check_mask(const char* op, const Matrix& scores, const Matrix& mask) {
  require_same_shape(op, scores, mask);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const Real m = mask.data()[i];
    if (m != Real(0) && !is_masked(m)) {
      throw std::invalid_argument(std::string(op) + ": mask entries must be 0 or -inf");
    }
  }
}

}  // namespace

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

// ---------------------------------------------------------------------------
// Parameter / Var

Parameter::Parameter(std::string name_, Matrix value_)
    : name(std::move(name_)), value(std::move(value_)), grad(Matrix::Zero(value.rows(), value.cols())) {}

void Parameter::zero_grad() { grad.setZero(value.rows(), value.cols()); }

const Matrix& Var::value() const { return tape_of(*this).value(id_); }
const Matrix& Var::grad() const { return tape_of(*this).grad(id_); }

Real Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): value has shape " + shape_string(v));
  return v(0, 0);
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}

void Tape::ensure_grad(Node& n) {
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
}

const Matrix& Tape::grad(int id) const {
  static const Matrix kEmpty;
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.has_grad ? n.grad : kEmpty;
}

Var Tape::record(const char* op, Matrix value, bool requires_grad, BackwardFn backward) {
  if (!value.allFinite()) throw NumericError(std::string(op) + " produced a non-finite value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return record("constant", std::move(value), false, nullptr); }

Var Tape::variable(Matrix value) { return record("variable", std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Var v = record(p.name.empty() ? "param" : p.name.c_str(), p.value, true, nullptr);
  nodes_.back().param = &p;
  param_nodes_.emplace(&p, v.id());
  return v;
}

void Tape::record_sparse_rows(Parameter& table, std::vector<int> rows, int node) {
  sparse_.push_back({&table, std::move(rows), node});
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (backward_done_) throw std::logic_error("backward called twice without zero_grad");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_string(value(loss.id())));
  }
  backward_done_ = true;
  Node& root = nodes_[static_cast<std::size_t>(loss.id())];
  if (!root.requires_grad) return;
  ensure_grad(root);
  root.grad(0, 0) += 1;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
  // Nodes that did not influence the loss get an explicit zero gradient.
  for (auto& n : nodes_) {
    if (n.requires_grad) ensure_grad(n);
  }
}

void Tape::accumulate_parameter_grads() {
  for (auto& n : nodes_) {
    if (n.param && n.has_grad) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols()) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
  for (const auto& s : sparse_) {
    const Node& n = nodes_[static_cast<std::size_t>(s.node)];
    if (!n.has_grad) continue;
    Parameter& table = *s.table;
    if (table.grad.rows() != table.value.rows() || table.grad.cols() != table.value.cols()) table.zero_grad();
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
      table.grad.row(s.rows[r]) += n.grad.row(static_cast<Eigen::Index>(r));
    }
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  backward_done_ = false;
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(av) + " vs " + shape_string(bv));
  }
  const int ia = a.id(), ib = b.id();
  return t.record("matmul", av * bv, needs_grad(t, {ia, ib}), [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record("transpose", a.value().transpose(), needs_grad(t, {ia}),
                  [ia](Tape& tp, int self) { tp.accumulate(ia, tp.grad(self).transpose()); });
}

namespace {

Var add_or_sub(const Var& a, const Var& b, Real sign, const char* op) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const int ia = a.id(), ib = b.id();
  const bool broadcast = bv.rows() == 1 && av.rows() != 1 && bv.cols() == av.cols();
  if (!broadcast) require_same_shape(op, av, bv);
  Matrix out = av;
  if (broadcast) {
    out.rowwise() += sign * bv.row(0);
  } else {
    out += sign * bv;
  }
  return t.record(op, std::move(out), needs_grad(t, {ia, ib}), [ia, ib, broadcast, sign](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    tp.accumulate(ia, g);
    if (!tp.requires_grad(ib)) return;
    if (broadcast) {
      tp.accumulate(ib, sign * g.colwise().sum());
    } else {
      tp.accumulate(ib, sign * g);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return add_or_sub(a, b, 1, "add"); }
Var sub(const Var& a, const Var& b) { return add_or_sub(a, b, -1, "sub"); }

Var mul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return t.record("mul", a.value().cwiseProduct(b.value()), needs_grad(t, {ia, ib}), [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

Var scale(const Var& a, Real s) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record("scale", s * a.value(), needs_grad(t, {ia}),
                  [ia, s](Tape& tp, int self) { tp.accumulate(ia, s * tp.grad(self)); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  bool grad = false;
  for (const auto& p : parts) {
    tape_of(parts[0], p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: shape mismatch " + shape_string(parts[0].value()) + " vs " +
                       shape_string(p.value()));
    }
    cols += p.cols();
    ids.push_back(p.id());
    grad = grad || (t.grad_enabled() && t.requires_grad(p.id()));
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record("concat_cols", std::move(out), grad, [ids](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Eigen::Index at = 0;
    for (int id : ids) {
      const Eigen::Index c = tp.value(id).cols();
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleCols(at, c));
      at += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  bool grad = false;
  for (const auto& p : parts) {
    tape_of(parts[0], p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: shape mismatch " + shape_string(parts[0].value()) + " vs " +
                       shape_string(p.value()));
    }
    rows += p.rows();
    ids.push_back(p.id());
    grad = grad || (t.grad_enabled() && t.requires_grad(p.id()));
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.record("concat_rows", std::move(out), grad, [ids](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Eigen::Index at = 0;
    for (int id : ids) {
      const Eigen::Index r = tp.value(id).rows();
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleRows(at, r));
      at += r;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside " + shape_string(a.value()));
  }
  const int ia = a.id();
  return t.record("slice_cols", a.value().middleCols(start, count), needs_grad(t, {ia}),
                  [ia, start, count](Tape& tp, int self) {
                    Matrix g = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
                    g.middleCols(start, count) = tp.grad(self);
                    tp.accumulate(ia, g);
                  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside " + shape_string(a.value()));
  }
  const int ia = a.id();
  return t.record("slice_rows", a.value().middleRows(start, count), needs_grad(t, {ia}),
                  [ia, start, count](Tape& tp, int self) {
                    Matrix g = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
                    g.middleRows(start, count) = tp.grad(self);
                    tp.accumulate(ia, g);
                  });
}

// ---------------------------------------------------------------------------
// Normalization and attention

Var row_softmax_with_mask(const Var& scores, const Matrix& mask) {
  Tape& t = tape_of(scores);
  check_mask("row_softmax_with_mask", scores.value(), mask);
  Matrix probs;
  masked_softmax_rows(scores.value(), &mask, probs);
  const int is = scores.id();
  return t.record("row_softmax_with_mask", std::move(probs), needs_grad(t, {is}), [is](Tape& tp, int self) {
    tp.accumulate(is, softmax_backward(tp.value(self), tp.grad(self)));
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  Tape& t = tape_of(x, gain);
  tape_of(x, bias);
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.cols();
  if (gain.rows() != 1 || gain.cols() != n) {
    throw ShapeError("layer_norm: shape mismatch " + shape_string(xv) + " vs gain " + shape_string(gain.value()));
  }
  if (bias.rows() != 1 || bias.cols() != n) {
    throw ShapeError("layer_norm: shape mismatch " + shape_string(xv) + " vs bias " + shape_string(bias.value()));
  }
  Matrix normalized(xv.rows(), n);
  Eigen::Matrix<Real, Eigen::Dynamic, 1> inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const Real mu = xv.row(i).mean();
    const Real var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = Real(1) / std::sqrt(var + kLayerNormEps);
    normalized.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = normalized;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record("layer_norm", std::move(out), needs_grad(t, {ix, ig, ib}),
                  [ix, ig, ib, normalized = std::move(normalized), inv_std = std::move(inv_std)](Tape& tp, int self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ig)) tp.accumulate(ig, g.cwiseProduct(normalized).colwise().sum());
                    if (tp.requires_grad(ib)) tp.accumulate(ib, g.colwise().sum());
                    if (!tp.requires_grad(ix)) return;
                    Matrix dn = g;
                    dn.array().rowwise() *= tp.value(ig).row(0).array();
                    const auto cols = static_cast<Real>(dn.cols());
                    Matrix dx(dn.rows(), dn.cols());
                    for (Eigen::Index i = 0; i < dn.rows(); ++i) {
                      const Real sum_dn = dn.row(i).sum();
                      const Real sum_dn_n = dn.row(i).dot(normalized.row(i));
                      dx.row(i) = (inv_std(i) / cols) *
                                  (cols * dn.row(i).array() - sum_dn - normalized.row(i).array() * sum_dn_n);
                    }
                    tp.accumulate(ix, dx);
                  });
}

Var masked_multi_head_attention(const Var& q, const Var& k, const Var& v, const Matrix* mask, int heads,
                                Real scale) {
  Tape& t = tape_of(q, k);
  tape_of(q, v);
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  if (qv.cols() != kv.cols()) throw ShapeError("attention: shape mismatch " + shape_string(qv) + " vs " + shape_string(kv));
  if (kv.rows() != vv.rows() || kv.cols() != vv.cols()) {
    throw ShapeError("attention: shape mismatch " + shape_string(kv) + " vs " + shape_string(vv));
  }
  if (heads < 1 || qv.cols() % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(qv.cols()) + " not divisible into " +
                     std::to_string(heads) + " heads");
  }
  if (mask) {
    Matrix probe(qv.rows(), kv.rows());
    check_mask("attention", probe, *mask);
  }
  const Eigen::Index hd = qv.cols() / heads;
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(qv.rows(), vv.cols());
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * hd;
    Matrix scores = scale * (qv.middleCols(c0, hd) * kv.middleCols(c0, hd).transpose());
    masked_softmax_rows(scores, mask, probs[static_cast<std::size_t>(h)]);
    out.middleCols(c0, hd) = probs[static_cast<std::size_t>(h)] * vv.middleCols(c0, hd);
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return t.record("masked_multi_head_attention", std::move(out), needs_grad(t, {iq, ik, iv}),
                  [iq, ik, iv, heads, hd, scale, probs = std::move(probs)](Tape& tp, int self) {
                    const Matrix& g = tp.grad(self);
                    const Matrix& qv = tp.value(iq);
                    const Matrix& kv = tp.value(ik);
                    const Matrix& vv = tp.value(iv);
                    Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
                    Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
                    Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
                    for (int h = 0; h < heads; ++h) {
                      const Eigen::Index c0 = h * hd;
                      const Matrix& p = probs[static_cast<std::size_t>(h)];
                      const auto go = g.middleCols(c0, hd);
                      dv.middleCols(c0, hd).noalias() += p.transpose() * go;
                      const Matrix dp = go * vv.middleCols(c0, hd).transpose();
                      const Matrix ds = scale * softmax_backward(p, dp);
                      dq.middleCols(c0, hd).noalias() += ds * kv.middleCols(c0, hd);
                      dk.middleCols(c0, hd).noalias() += ds.transpose() * qv.middleCols(c0, hd);
                    }
                    tp.accumulate(iq, dq);
                    tp.accumulate(ik, dk);
                    tp.accumulate(iv, dv);
                  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities and reductions

Var relu(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record("relu", a.value().cwiseMax(Real(0)), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    tp.accumulate(ia, (tp.value(ia).array() > 0).select(tp.grad(self), Real(0)).matrix());
  });
}

Var prelu(const Var& a, const Var& slope) {
  Tape& t = tape_of(a, slope);
  if (slope.value().size() != 1) throw ShapeError("prelu: slope must be 1x1, got " + shape_string(slope.value()));
  const Real s = slope.value()(0, 0);
  const Matrix& av = a.value();
  Matrix out = (av.array() > 0).select(av, s * av);
  const int ia = a.id(), is = slope.id();
  return t.record("prelu", std::move(out), needs_grad(t, {ia, is}), [ia, is](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    const Matrix& x = tp.value(ia);
    const Real s = tp.value(is)(0, 0);
    if (tp.requires_grad(ia)) tp.accumulate(ia, (x.array() > 0).select(g, s * g).matrix());
    if (tp.requires_grad(is)) {
      Matrix ds(1, 1);
      ds(0, 0) = (x.array() > 0).select(Matrix::Zero(x.rows(), x.cols()), g.cwiseProduct(x)).sum();
      tp.accumulate(is, ds);
    }
  });
}

Var softplus(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([](Real x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
  return t.record("softplus", std::move(out), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    const Matrix sig = tp.value(ia).unaryExpr([](Real x) {
      return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
    });
    tp.accumulate(ia, tp.grad(self).cwiseProduct(sig));
  });
}

Var log(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record("log", a.value().array().log().matrix(), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    tp.accumulate(ia, (tp.grad(self).array() / tp.value(ia).array()).matrix());
  });
}

Var exp(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record("exp", a.value().array().exp().matrix(), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    tp.accumulate(ia, tp.grad(self).cwiseProduct(tp.value(self)));
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record("sum", std::move(out), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    const Matrix& x = tp.value(ia);
    tp.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), tp.grad(self)(0, 0)));
  });
}

Var mean(const Var& a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  if (a.value().size() == 0) throw ShapeError("mean: empty input");
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  return t.record("mean", std::move(out), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    const Matrix& x = tp.value(ia);
    tp.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), tp.grad(self)(0, 0) / static_cast<Real>(x.size())));
  });
}

Var log_sum_exp(const Var& a) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (av.size() == 0) throw ShapeError("log_sum_exp: empty input");
  const Real m = av.maxCoeff();
  Matrix out(1, 1);
  out(0, 0) = m + std::log((av.array() - m).exp().sum());
  const int ia = a.id();
  return t.record("log_sum_exp", std::move(out), needs_grad(t, {ia}), [ia](Tape& tp, int self) {
    // Softmax from the shifted exponentials; subtracting the rounded lse
    // would lose precision for large inputs.
    const Matrix& x = tp.value(ia);
    const Eigen::Array<Real, Eigen::Dynamic, Eigen::Dynamic> e = (x.array() - x.maxCoeff()).exp();
    tp.accumulate(ia, (tp.grad(self)(0, 0) / e.sum() * e).matrix());
  });
}

Var dropout(const Var& a, Real p, std::mt19937_64& rng, bool train) {
  if (p < 0 || p >= 1) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  Tape& t = tape_of(a);
  if (!train || p == 0) return a;
  const Matrix& av = a.value();
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  Matrix scale_mask(av.rows(), av.cols());
  const Real inv = Real(1) / (Real(1) - p);
  for (Eigen::Index i = 0; i < scale_mask.size(); ++i) scale_mask.data()[i] = keep(rng) ? inv : Real(0);
  const int ia = a.id();
  Matrix out = av.cwiseProduct(scale_mask);
  return t.record("dropout", std::move(out), needs_grad(t, {ia}), [ia, scale_mask = std::move(scale_mask)](Tape& tp, int self) {
    tp.accumulate(ia, tp.grad(self).cwiseProduct(scale_mask));
  });
}

Var embedding_lookup(Tape& tape, Parameter& table, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), table.value.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= table.value.rows()) {
      throw std::out_of_range("embedding_lookup: row " + std::to_string(rows[r]) + " outside table " + table.name +
                              " " + shape_string(table.value));
    }
    out.row(static_cast<Eigen::Index>(r)) = table.value.row(rows[r]);
  }
  // Gradient flows to the table through the sparse record, not a closure.
  Var v = tape.record("embedding_lookup", std::move(out), true, nullptr);
  if (tape.grad_enabled()) tape.record_sparse_rows(table, {rows.begin(), rows.end()}, v.id());
  return v;
}

// ---------------------------------------------------------------------------
// Gradient checking

Real relative_error(Real analytic, Real numeric) {
  const Real denom = std::max({std::abs(analytic), std::abs(numeric), static_cast<Real>(1e-8)});
  return std::abs(analytic - numeric) / denom;
}

Real grad_check(const TapeFunction& f, std::span<const Matrix> inputs, Real eps) {
  if (eps < static_cast<Real>(1e-7) || eps > static_cast<Real>(1e-3)) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.variable(m));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  auto evaluate = [&](const std::vector<Matrix>& values) {
    Tape tape(false);
    std::vector<Var> vars;
    for (const auto& m : values) vars.push_back(tape.constant(m));
    return f(tape, vars).scalar();
  };
  std::vector<Matrix> probe(inputs.begin(), inputs.end());
  Real worst = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (Eigen::Index j = 0; j < probe[i].size(); ++j) {
      const Real original = probe[i].data()[j];
      probe[i].data()[j] = original + eps;
      const Real plus = evaluate(probe);
      probe[i].data()[j] = original - eps;
      const Real minus = evaluate(probe);
      probe[i].data()[j] = original;
      worst = std::max(worst, relative_error(analytic[i].data()[j], (plus - minus) / (2 * eps)));
    }
  }
  return worst;
}

Real grad_check_parameters(const std::function<Var(Tape&)>& f, std::span<Parameter* const> params, Real eps) {
  if (eps < static_cast<Real>(1e-7) || eps > static_cast<Real>(1e-3)) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
    tape.accumulate_parameter_grads();
  }
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  auto evaluate = [&] {
    Tape tape(false);
    return f(tape).scalar();
  };
  Real worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = params[i]->value;
    for (Eigen::Index j = 0; j < value.size(); ++j) {
      const Real original = value.data()[j];
      value.data()[j] = original + eps;
      const Real plus = evaluate();
      value.data()[j] = original - eps;
      const Real minus = evaluate();
      value.data()[j] = original;
      worst = std::max(worst, relative_error(analytic[i].data()[j], (plus - minus) / (2 * eps)));
    }
  }
  for (auto* p : params) p->zero_grad();
  return worst;
}

}  // namespace tcl::ad
