// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace headrf {

using detail::Node;
using detail::NodePtr;

namespace {

thread_local Tape* g_active_tape = nullptr;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

// C[n,m] (+)= op(A)[n,k] * op(B)[k,m] on row-major buffers. Vector-shaped and
// tiny products are summed in a fixed order, independent of buffer addresses.
void gemm(double* c, const double* a, bool trans_a, const double* b, bool trans_b, std::size_t n, std::size_t k,
          std::size_t m, bool accumulate) {
  const auto ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k), mi = static_cast<Eigen::Index>(m);
  if (n == 1 || m == 1 || n + k + m < 24) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
          acc += (trans_a ? a[p * n + i] : a[i * k + p]) * (trans_b ? b[j * k + p] : b[p * m + j]);
        }
        c[i * m + j] = accumulate ? c[i * m + j] + acc : acc;
      }
    }
    return;
  }
  MatMap out(c, ni, mi);
  if (!accumulate) out.setZero();
  if (trans_a) {
    out.noalias() += ConstMatMap(a, ki, ni).transpose() * ConstMatMap(b, ki, mi);
  } else if (trans_b) {
    out.noalias() += ConstMatMap(a, ni, ki) * ConstMatMap(b, mi, ki).transpose();
  } else {
    out.noalias() += ConstMatMap(a, ni, ki) * ConstMatMap(b, ki, mi);
  }
}

NodePtr make_node(Shape shape, std::vector<double> data) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return node;
}

void require(bool ok, std::string_view op, const std::string& what) {
  if (!ok) throw ContractViolation(std::string(op) + ": " + what);
}

// outer x n x inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class Bcast { kSame, kScalar, kRow, kCol };

Bcast classify(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Bcast::kSame;
  if (b.numel() == 1) return Bcast::kScalar;
  const bool b_row_shaped = b.rank() == 1 || (b.rank() == 2 && b.dim(0) == 1);
  if (b_row_shaped && a.rank() >= 1 && b.numel() == a.shape().back()) return Bcast::kRow;
  if (a.rank() == 2 && b.rank() == 2 && b.dim(1) == 1 && b.dim(0) == a.dim(0)) return Bcast::kCol;
  throw ContractViolation(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
                          shape_str(a.shape()));
}

// Index of b's element paired with a's flat index i.
inline std::size_t bidx(Bcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Bcast::kSame:
      return i;
    case Bcast::kScalar:
      return 0;
    case Bcast::kRow:
      return i % cols;
    case Bcast::kCol:
      return i / cols;
  }
  return 0;
}

template <typename Fwd, typename Bwd>
Tensor binary(std::string_view name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd dfd) {
  const Bcast kind = classify(name, a, b);
  const std::size_t cols = a.rank() == 0 ? 1 : a.shape().back();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[bidx(kind, i, cols)]);
  return record_op(name, {a, b}, a.shape(), std::move(out),
                   [kind, cols, dfd](Node& o, std::span<Node* const> in) {
                     Node& na = *in[0];
                     Node& nb = *in[1];
                     if (na.requires_grad) na.ensure_grad();
                     if (nb.requires_grad) nb.ensure_grad();
                     for (std::size_t i = 0; i < o.grad.size(); ++i) {
                       const std::size_t j = bidx(kind, i, cols);
                       const auto [da, db] = dfd(na.data[i], nb.data[j]);
                       if (na.requires_grad) na.grad[i] += o.grad[i] * da;
                       if (nb.requires_grad) nb.grad[j] += o.grad[i] * db;
                     }
                   });
}

// dfd(x, y) returns dy/dx given input x and output y.
template <typename Fwd, typename Bwd>
Tensor unary(std::string_view name, const Tensor& a, Fwd fwd, Bwd dfd) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return record_op(name, {a}, a.shape(), std::move(out), [dfd](Node& o, std::span<Node* const> in) {
    Node& na = *in[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += o.grad[i] * dfd(na.data[i], o.data[i]);
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : node_(make_node({}, {0.0})) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  Tensor t(make_node(std::move(shape), std::vector<double>(n, value)));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ContractViolation("Tensor::from: shape " + shape_str(shape) + " does not hold " +
                            std::to_string(values.size()) + " values");
  }
  Tensor t(make_node(std::move(shape), std::move(values)));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ContractViolation("Tensor::dim: axis out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractViolation("Tensor::item on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) node_->ensure_grad();
}

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

std::vector<double> Tensor::grad_values() const {
  auto g = grad();
  return {g.begin(), g.end()};
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(node_->data.begin(), node_->data.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::detach() const {
  auto node = make_node(node_->shape, node_->data);
  return Tensor(node);
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.set_requires_grad(requires_grad());
  return t;
}

// ---------------------------------------------------------------------------
// Tape

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Op op) { ops_.push_back(std::move(op)); }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ContractViolation("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (ops_.empty()) throw ContractViolation("backward: tape is empty");
  Node& root = *loss.node();
  root.ensure_grad();
  root.grad[0] += 1.0;
  std::vector<Node*> inputs;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    Node& out = *it->output;
    if (out.grad.empty()) continue;  // unreachable from the loss
    inputs.clear();
    for (const auto& in : it->inputs) inputs.push_back(in.get());
    it->backward(out, inputs);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tensor record_op(std::string_view name, std::vector<Tensor> inputs, Shape out_shape, std::vector<double> out_values,
                 Tape::BackwardFn backward) {
  Tensor out = Tensor::from(std::move(out_shape), std::move(out_values));
  Tape* tape = Tape::active();
  if (tape == nullptr) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node()->requires_grad = true;
  Tape::Op op;
  op.name = name;
  op.output = out.node();
  op.backward = std::move(backward);
  for (auto& t : inputs) op.inputs.push_back(t.node());
  tape->record(std::move(op));
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double x, double y) { return std::pair{y, x}; });
}

Tensor neg(const Tensor& a) {
  return unary(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw DomainError("log: input " + std::to_string(v) + " outside (0, inf)");
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v >= 0.0)) throw DomainError("sqrt: input " + std::to_string(v) + " outside [0, inf)");
  }
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sin(const Tensor& a) {
  return unary(
      "sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary(
      "cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Tensor minimum(const Tensor& a, double c) {
  return unary(
      "minimum", a, [c](double x) { return x < c ? x : c; }, [c](double x, double) { return x < c ? 1.0 : 0.0; });
}

Tensor maximum(const Tensor& a, double c) {
  return unary(
      "maximum", a, [c](double x) { return x > c ? x : c; }, [c](double x, double) { return x > c ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul",
          "incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m);
  gemm(out.data(), a.values().data(), false, b.values().data(), false, n, k, m, false);
  return record_op("matmul", {a, b}, {n, m}, std::move(out), [n, k, m](Node& o, std::span<Node* const> in) {
    Node& na = *in[0];
    Node& nb = *in[1];
    if (na.requires_grad) {
      na.ensure_grad();
      gemm(na.grad.data(), o.grad.data(), false, nb.data.data(), true, n, m, k, true);
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      gemm(nb.grad.data(), na.data.data(), true, o.grad.data(), false, k, n, m, true);
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && x.dim(1) == weight.dim(0), "affine",
          "incompatible shapes " + shape_str(x.shape()) + " x " + shape_str(weight.shape()));
  const std::size_t n = x.dim(0), k = x.dim(1), m = weight.dim(1);
  require(bias.numel() == m, "affine", "bias of shape " + shape_str(bias.shape()) + " for width " + std::to_string(m));
  std::vector<double> out(n * m);
  gemm(out.data(), x.values().data(), false, weight.values().data(), false, n, k, m, false);
  const auto& bv = bias.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  }
  return record_op("affine", {x, weight, bias}, {n, m}, std::move(out), [n, k, m](Node& o, std::span<Node* const> in) {
    Node& nx = *in[0];
    Node& nw = *in[1];
    Node& nbias = *in[2];
    if (nx.requires_grad) {
      nx.ensure_grad();
      gemm(nx.grad.data(), o.grad.data(), false, nw.data.data(), true, n, m, k, true);
    }
    if (nw.requires_grad) {
      nw.ensure_grad();
      gemm(nw.grad.data(), nx.data.data(), true, o.grad.data(), false, k, n, m, true);
    }
    if (nbias.requires_grad) {
      nbias.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double* g = o.grad.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) nbias.grad[j] += g[j];
      }
    }
  });
}

Tensor spmm(const SparseRows& s, const Tensor& x) {
  require(x.rank() == 2 && x.dim(0) == s.cols, "spmm",
          "sparse [" + std::to_string(s.rows) + "," + std::to_string(s.cols) + "] times " + shape_str(x.shape()));
  require(s.row_ptr.size() == s.rows + 1, "spmm", "malformed row pointer");
  const std::size_t c = x.dim(1);
  const auto& xv = x.values();
  std::vector<double> out(s.rows * c, 0.0);
  for (std::size_t r = 0; r < s.rows; ++r) {
    double* dst = out.data() + r * c;
    for (std::size_t e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) {
      const double w = s.values[e];
      const double* src = xv.data() + s.col_idx[e] * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
    }
  }
  // The sparse map is captured by value; callers often reuse one map across steps.
  return record_op("spmm", {x}, {s.rows, c}, std::move(out), [s, c](Node& o, std::span<Node* const> in) {
    Node& nx = *in[0];
    nx.ensure_grad();
    for (std::size_t r = 0; r < s.rows; ++r) {
      const double* g = o.grad.data() + r * c;
      for (std::size_t e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) {
        const double w = s.values[e];
        double* dst = nx.grad.data() + s.col_idx[e] * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += w * g[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and structure

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return record_op("sum", {a}, {}, {total}, [](Node& o, std::span<Node* const> in) {
    Node& na = *in[0];
    na.ensure_grad();
    for (double& g : na.grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean", "empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a, std::size_t axis) {
  require(axis < a.rank(), "sum", "axis out of range for " + shape_str(a.shape()));
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto& av = a.values();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += av[(o * s.n + k) * s.inner + i];
  return record_op("sum_axis", {a}, std::move(out_shape), std::move(out), [s](Node& o, std::span<Node* const> in) {
    Node& na = *in[0];
    na.ensure_grad();
    for (std::size_t oo = 0; oo < s.outer; ++oo)
      for (std::size_t k = 0; k < s.n; ++k)
        for (std::size_t i = 0; i < s.inner; ++i) na.grad[(oo * s.n + k) * s.inner + i] += o.grad[oo * s.inner + i];
  });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  require(axis < a.rank() && a.dim(axis) > 0, "mean", "axis out of range or empty");
  return mul_scalar(sum(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

Tensor cumsum(const Tensor& a, std::size_t axis, bool exclusive) {
  require(axis < a.rank(), "cumsum", "axis out of range for " + shape_str(a.shape()));
  const AxisSplit s = split_axis(a.shape(), axis);
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double run = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const std::size_t idx = (o * s.n + k) * s.inner + i;
        if (exclusive) {
          out[idx] = run;
          run += av[idx];
        } else {
          run += av[idx];
          out[idx] = run;
        }
      }
    }
  return record_op("cumsum", {a}, a.shape(), std::move(out), [s, exclusive](Node& o, std::span<Node* const> in) {
    Node& na = *in[0];
    na.ensure_grad();
    // Reverse running sum of the incoming gradient.
    for (std::size_t oo = 0; oo < s.outer; ++oo)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double run = 0.0;
        for (std::size_t k = s.n; k-- > 0;) {
          const std::size_t idx = (oo * s.n + k) * s.inner + i;
          if (exclusive) {
            na.grad[idx] += run;
            run += o.grad[idx];
          } else {
            run += o.grad[idx];
            na.grad[idx] += run;
          }
        }
      }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat", "no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat", "axis out of range for " + shape_str(first));
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), "concat", "rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis) require(p.dim(d) == first[d], "concat", "extent mismatch " + shape_str(p.shape()));
    }
    widths.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const AxisSplit s = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& pv = parts[p].values();
    const std::size_t block = widths[p] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(pv.data() + o * block, block, out.data() + (o * s.n + offset) * s.inner);
    offset += widths[p];
  }
  return record_op("concat", parts, std::move(out_shape), std::move(out),
                   [s, widths](Node& o, std::span<Node* const> in) {
                     std::size_t off = 0;
                     for (std::size_t p = 0; p < in.size(); ++p) {
                       Node& np = *in[p];
                       const std::size_t block = widths[p] * s.inner;
                       if (np.requires_grad) {
                         np.ensure_grad();
                         for (std::size_t oo = 0; oo < s.outer; ++oo) {
                           const double* src = o.grad.data() + (oo * s.n + off) * s.inner;
                           double* dst = np.grad.data() + oo * block;
                           for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
                         }
                       }
                       off += widths[p];
                     }
                   });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < a.rank(), "slice", "axis out of range for " + shape_str(a.shape()));
  require(begin <= end && end <= a.dim(axis), "slice", "range out of bounds");
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  std::vector<double> out(s.outer * block);
  const auto& av = a.values();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(av.data() + (o * s.n + begin) * s.inner, block, out.data() + o * block);
  return record_op("slice", {a}, std::move(out_shape), std::move(out),
                   [s, begin, block](Node& o, std::span<Node* const> in) {
                     Node& na = *in[0];
                     na.ensure_grad();
                     for (std::size_t oo = 0; oo < s.outer; ++oo) {
                       const double* src = o.grad.data() + oo * block;
                       double* dst = na.grad.data() + (oo * s.n + begin) * s.inner;
                       for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
                     }
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape",
          "cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  return record_op("reshape", {a}, std::move(shape), a.values(), [](Node& o, std::span<Node* const> in) {
    Node& na = *in[0];
    na.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += o.grad[i];
  });
}

}  // namespace headrf
