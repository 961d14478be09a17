#pragma once

// Dense float64 tensor with tape-style reverse-mode differentiation.
//
// A Tensor is a shared handle to a graph node. Ops build a fresh node whose
// backward closure scatters gradients into its parents; the graph is rebuilt
// every step and dropped with the last handle. Values are never mutated by
// forward evaluation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mpseg {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);

/// Sentinel written into blocked attention logits.
inline constexpr double kBlockedLogit = -1e9;

/// Row-major boolean grid; `true` marks a blocked entry.
struct BoolGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  BoolGrid() = default;
  BoolGrid(std::size_t r, std::size_t c, bool fill = false)
      : rows(r), cols(c), bits(r * c, fill ? 1 : 0) {}

  bool at(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits[r * cols + c] = v ? 1 : 0; }
  bool operator==(const BoolGrid&) const = default;
};

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t ndim() const { return node_->shape.size(); }
  /// Product of all extents but the last.
  std::size_t rows() const;
  /// Last extent.
  std::size_t cols() const { return node_->shape.back(); }

  std::span<const double> values() const { return node_->value; }
  /// In-place access for optimizer updates, strictly between steps.
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  /// Empty span until a backward pass has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad();

  /// Same values, no graph history, no gradient.
  Tensor detach() const;
  /// New tensor with the same values viewed under another shape.
  Tensor reshape(Shape shape) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Populates ∂loss/∂t for every requires_grad ancestor. Leaf gradients
/// accumulate across calls; intermediate gradients are recomputed.
void backward(const Tensor& loss);

// Linear algebra. Operands are viewed as matrices (rows × last extent).
Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m×k]·[n×k]ᵀ

// Elementwise. `b` may equal a's shape or be a 1-D row of a's last extent.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // same shape only
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
/// Normalizes each last-dimension slice, then applies gamma/beta (1-D, may be undefined).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Replaces entries where `block` is true by `fill`; blocked entries get no gradient.
Tensor masked_fill(const Tensor& x, const BoolGrid& block, double fill);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_lastdim(const Tensor& x);  // [..., n] -> [...]
/// out[r] = x[r, idx[r]].
Tensor pick_lastdim(const Tensor& x, std::span<const std::size_t> idx);

Tensor concat_rows(std::span<const Tensor> parts);
/// Rows idx[0], idx[1], ... of a matrix.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

/// Per-row mean of sigmoid cross-entropy against constant targets in [0,1].
Tensor bce_with_logits_rows(const Tensor& logits, std::span<const double> targets);

}  // namespace mpseg
