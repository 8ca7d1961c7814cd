#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace tcl::ad {

#ifdef TCL_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Finite stand-in for -infinity in additive attention masks. Any mask entry at
/// or below half this value (including -inf) marks a key as excluded.
inline constexpr Real kMaskedScore = static_cast<Real>(-1e9);

inline bool is_masked(Real mask_entry) { return mask_entry <= kMaskedScore / 2; }

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_string(const Matrix& m);

/// A learned tensor plus its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  void zero_grad();

  std::string name;
  Matrix value;
  Matrix grad;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 result.
  Real scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records primitive applications in execution order (which is topological)
/// and replays them backwards. Not thread-safe; use one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// A leaf whose gradient is collected (grad_check inputs, tests).
  Var variable(Matrix value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter& p);

  /// Populates gradients of every node that leads to `loss` (a 1x1 value).
  void backward(const Var& loss);
  /// Adds this tape's parameter gradients into Parameter::grad.
  void accumulate_parameter_grads();
  /// Drops gradients so that backward may run again.
  void zero_grad();

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Interface for primitive implementations.
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Adds `g` into the gradient of node `id` if that node requires one.
  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += g;
  }
  Var record(const char* op, Matrix value, bool requires_grad, BackwardFn backward);
  void record_sparse_rows(Parameter& table, std::vector<int> rows, int node);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  struct SparseRows {
    Parameter* table;
    std::vector<int> rows;
    int node;
  };

  static void ensure_grad(Node& n);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  std::vector<SparseRows> sparse_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. All inputs must live on the same tape.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// Elementwise sum; `b` may also be a 1 x cols row vector broadcast over rows.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise (Hadamard) product.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Real s);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);

/// Row-wise softmax over entries whose additive mask is 0. Masked entries get
/// probability exactly 0; a fully masked row is all zeros.
Var row_softmax_with_mask(const Var& scores, const Matrix& mask);

inline constexpr Real kLayerNormEps = static_cast<Real>(1e-5);
/// Row-wise layer normalization with 1 x cols gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias);

Var relu(const Var& a);
/// Parametric ReLU with a single learned 1x1 slope.
Var prelu(const Var& a, const Var& slope);
Var softplus(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// log(sum(exp(a))) over every entry, computed stably.
Var log_sum_exp(const Var& a);

/// Inverted dropout: identity when !train, otherwise zeroes each entry with
/// probability p and scales survivors by 1 / (1 - p).
Var dropout(const Var& a, Real p, std::mt19937_64& rng, bool train);

/// Gathers rows of an embedding table; gradients are scattered back sparsely.
Var embedding_lookup(Tape& tape, Parameter& table, std::span<const int> rows);

/// Multi-head scaled dot-product attention with an optional additive mask.
/// q is mq x D, k and v are mk x D with D = heads * head_dim; head h uses
/// columns [h * head_dim, (h + 1) * head_dim). Scores are scaled by `scale`.
Var masked_multi_head_attention(const Var& q, const Var& k, const Var& v, const Matrix* mask, int heads,
                                Real scale);

// ---------------------------------------------------------------------------
// Finite-difference checking.

/// max |a - n| / max(|a|, |n|, 1e-8)
Real relative_error(Real analytic, Real numeric);

using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Central-difference check of d f / d inputs. Returns the max relative error.
Real grad_check(const TapeFunction& f, std::span<const Matrix> inputs, Real eps);

/// Same, against parameter values. Parameter gradients are left zeroed.
Real grad_check_parameters(const std::function<Var(Tape&)>& f, std::span<Parameter* const> params, Real eps);

}  // namespace tcl::ad
