// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace headrf {

using Shape = std::vector<std::size_t>;

/// Raised when a caller breaks an operation's precondition (shape, range, arity).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for inputs outside a primitive's mathematical domain (log/sqrt of negatives).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a NaN or Inf shows up where finite values are required.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};
using NodePtr = std::shared_ptr<Node>;
}  // namespace detail

/// Handle to an n-dimensional array of doubles in row-major order.
///
/// Copies share storage. Use `clone()` for an independent copy and `detach()`
/// for a view of the same values that does not participate in differentiation.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  /// Gradient buffer; zeros if backward never reached this tensor.
  std::span<const double> grad() const;
  std::vector<double> grad_values() const;
  void zero_grad();

  bool all_finite() const;
  Tensor detach() const;
  Tensor clone() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// Define-by-run record of differentiable operations.
///
/// A tape is installed for the current thread with `TapeScope`; primitives
/// record themselves only while a tape is active and at least one input
/// requires a gradient. Each recorded op is visited exactly once by
/// `backward`, in reverse recording order.
class Tape {
 public:
  using BackwardFn = std::function<void(detail::Node& out, std::span<detail::Node* const> inputs)>;

  struct Op {
    std::string_view name;
    std::vector<detail::NodePtr> inputs;
    detail::NodePtr output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Op op);
  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable input.
  /// Gradients accumulate into leaves; call `zero_grad` on parameters between steps.
  void backward(const Tensor& loss);
  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  void clear() { ops_.clear(); }
  const std::vector<Op>& ops() const { return ops_; }

  /// Tape receiving records on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<Op> ops_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Creates the output of a custom primitive and records it when needed.
/// `backward` receives the output node (with grad filled) and the input nodes;
/// it must add into `inputs[i]->grad` only for inputs with `requires_grad`.
Tensor record_op(std::string_view name, std::vector<Tensor> inputs, Shape out_shape,
                 std::vector<double> out_values, Tape::BackwardFn backward);

/// Compressed sparse rows with constant values, used for averaging,
/// gathering and interpolation maps. Not differentiable itself.
struct SparseRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  void push(std::size_t col, double value) {
    col_idx.push_back(col);
    values.push_back(value);
  }
  void end_row() {
    row_ptr.push_back(col_idx.size());
    ++rows;
  }
};

// ---------------------------------------------------------------------------
// Primitives. Broadcasting is limited to the right-hand operand `b` of the
// binary elementwise ops and takes one of these forms relative to `a`:
//   same shape | scalar (numel 1) | row [C] or [1,C] against [..., C] |
//   column [N,1] against [N,C]
// ---------------------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

/// [N,K] x [K,M] -> [N,M]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [N,K] * W [K,M] + bias [M]
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Gradient at exactly 0 is 0. NaN passes through.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
/// Domain x > 0; DomainError otherwise.
Tensor log(const Tensor& a);
/// Domain x >= 0; the gradient at exactly 0 is defined as 0.
Tensor sqrt(const Tensor& a);
/// Gradient at 0 is 0.
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
/// Elementwise min(a, c). Ties send the gradient to the constant (0 for a).
Tensor minimum(const Tensor& a, double c);
/// Elementwise max(a, c). Ties send the gradient to the constant (0 for a).
Tensor maximum(const Tensor& a, double c);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduces one axis; the axis is removed from the shape.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
/// Inclusive (or exclusive: first element 0) running sum along `axis`.
Tensor cumsum(const Tensor& a, std::size_t axis, bool exclusive = false);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
/// Constant sparse matrix [R,N] times x [N,C] -> [R,C].
Tensor spmm(const SparseRows& s, const Tensor& x);

}  // namespace headrf
