#include "mpseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mpseg/error.hpp"
#include "mpseg/kernels.hpp"

namespace mpseg {

using detail::Node;

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

namespace {

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward_fn = std::move(fn);
  }
  return Tensor(std::move(n));
}

// Gradient buffer of parent `i`, or nullptr when it does not need one.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  return p.ensure_grad().data();
}

const std::vector<double>& parent_value(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

enum class Broadcast { kSame, kRow };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.ndim() == 1 && b.size() == a.cols()) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": broadcast incompatibility between " +
                   shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = product(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty() || std::find(shape.begin(), shape.end(), 0u) != shape.end())
    throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  if (product(shape) != values.size())
    throw ShapeError("tensor shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

std::size_t Tensor::rows() const { return size() / cols(); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor Tensor::reshape(Shape s) const {
  if (product(s) != size())
    throw ShapeError("reshape " + shape_string(shape()) + " -> " + shape_string(s));
  return make_result(std::move(s), node_->value, {*this}, [](Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward needs a scalar loss, got " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
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
  for (Node* n : order)
    if (n->backward_fn) n->grad.assign(n->value.size(), 0.0);
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner extents differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  std::vector<double> out(m * n);
  kernels::gemm_nn(m, k, n, a.values(), b.values(), out, false);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    if (double* ga = parent_grad(self, 0))
      kernels::gemm_nt(m, n, k, self.grad, parent_value(self, 1), {ga, m * k}, true);
    if (double* gb = parent_grad(self, 1))
      kernels::gemm_tn(m, k, n, parent_value(self, 0), self.grad, {gb, k * n}, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k)
    throw ShapeError("matmul_nt: inner extents differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  std::vector<double> out(m * n);
  kernels::gemm_nt(m, k, n, a.values(), b.values(), out, false);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    if (double* ga = parent_grad(self, 0))
      kernels::gemm_nn(m, n, k, self.grad, parent_value(self, 1), {ga, m * k}, true);
    if (double* gb = parent_grad(self, 1))
      kernels::gemm_tn(m, n, k, self.grad, parent_value(self, 0), {gb, n * k}, true);
  });
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const auto mode = classify(a, b, "add");
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = a.size(), c = a.cols();
  std::vector<double> out(n);
  if (mode == Broadcast::kSame)
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
  else
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i % c];
  return make_result(a.shape(), std::move(out), {a, b}, [mode, n, c](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
    if (double* gb = parent_grad(self, 1)) {
      if (mode == Broadcast::kSame)
        for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i];
      else
        for (std::size_t i = 0; i < n; ++i) gb[i % c] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto mode = classify(a, b, "sub");
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = a.size(), c = a.cols();
  std::vector<double> out(n);
  if (mode == Broadcast::kSame)
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
  else
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i % c];
  return make_result(a.shape(), std::move(out), {a, b}, [mode, n, c](Node& self) {
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
    if (double* gb = parent_grad(self, 1)) {
      if (mode == Broadcast::kSame)
        for (std::size_t i = 0; i < n; ++i) gb[i] -= self.grad[i];
      else
        for (std::size_t i = 0; i < n; ++i) gb[i % c] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto mode = classify(a, b, "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = a.size(), c = a.cols();
  std::vector<double> out(n);
  if (mode == Broadcast::kSame)
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
  else
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i % c];
  return make_result(a.shape(), std::move(out), {a, b}, [mode, n, c](Node& self) {
    const auto& av = parent_value(self, 0);
    const auto& bv = parent_value(self, 1);
    if (double* ga = parent_grad(self, 0)) {
      if (mode == Broadcast::kSame)
        for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * bv[i];
      else
        for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * bv[i % c];
    }
    if (double* gb = parent_grad(self, 1)) {
      if (mode == Broadcast::kSame)
        for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i] * av[i];
      else
        for (std::size_t i = 0; i < n; ++i) gb[i % c] += self.grad[i] * av[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("div: shapes differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) / b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [n](Node& self) {
    const auto& av = parent_value(self, 0);
    const auto& bv = parent_value(self, 1);
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] / bv[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < n; ++i) gb[i] -= self.grad[i] * av[i] / (bv[i] * bv[i]);
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= c;
  return make_result(a.shape(), std::move(out), {a}, [c](Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += c * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v += c;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) > 0.0 ? x.at(i) : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    double* gx = parent_grad(self, 0);
    const auto& xv = parent_value(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xv[i] > 0.0) gx[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.at(i)));
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      gx[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

// ---------------------------------------------------------------------------

namespace {
void require_finite(const Tensor& x, const char* op) {
  for (double v : x.values())
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
}
}  // namespace

Tensor softmax_lastdim(const Tensor& x) {
  require_finite(x, "softmax");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.size());
  kernels::softmax_rows(r, c, x.values(), out);
  return make_result(x.shape(), std::move(out), {x}, [r, c](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* g = self.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor log_softmax_lastdim(const Tensor& x) {
  require_finite(x, "log_softmax");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = x.values().data() + i * c;
    const double mx = *std::max_element(xr, xr + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(xr[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xr[j] - lse;
  }
  return make_result(x.shape(), std::move(out), {x}, [r, c](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* g = self.grad.data() + i * c;
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j] - std::exp(y[j]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  const bool affine = gamma.defined();
  if (affine && (gamma.size() != c || !beta.defined() || beta.size() != c))
    throw ShapeError("layer_norm: affine parameters must have extent " + std::to_string(c));
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto rstd = std::make_shared<std::vector<double>>(r);
  kernels::normalize_rows(r, c, x.values(), eps, *xhat, *rstd);
  std::vector<double> out(*xhat);
  if (affine)
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = out[i] * gamma.at(i % c) + beta.at(i % c);

  std::vector<Tensor> parents{x};
  if (affine) {
    parents.push_back(gamma);
    parents.push_back(beta);
  }
  return make_result(x.shape(), std::move(out), std::move(parents),
                     [r, c, affine, xhat, rstd](Node& self) {
    const auto& xh = *xhat;
    std::vector<double> dxhat(self.grad);
    if (affine) {
      const auto& gv = parent_value(self, 1);
      for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] *= gv[i % c];
      if (double* gg = parent_grad(self, 1))
        for (std::size_t i = 0; i < xh.size(); ++i) gg[i % c] += self.grad[i] * xh[i];
      if (double* gb = parent_grad(self, 2))
        for (std::size_t i = 0; i < xh.size(); ++i) gb[i % c] += self.grad[i];
    }
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < r; ++i) {
      const double* d = dxhat.data() + i * c;
      const double* h = xh.data() + i * c;
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        m1 += d[j];
        m2 += d[j] * h[j];
      }
      m1 *= inv_c;
      m2 *= inv_c;
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += (*rstd)[i] * (d[j] - m1 - h[j] * m2);
    }
  });
}

Tensor masked_fill(const Tensor& x, const BoolGrid& block, double fill) {
  if (block.rows * block.cols != x.size() || block.cols != x.cols())
    throw ShapeError("masked_fill: block grid " + std::to_string(block.rows) + "x" +
                     std::to_string(block.cols) + " does not match " + shape_string(x.shape()));
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (block.bits[i]) out[i] = fill;
  auto bits = std::make_shared<std::vector<std::uint8_t>>(block.bits);
  return make_result(x.shape(), std::move(out), {x}, [bits](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (!(*bits)[i]) gx[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {x}, [](Node& self) {
    double* gx = parent_grad(self, 0);
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor sum_lastdim(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += x.at(i * c + j);
  Shape s(x.shape().begin(), x.shape().end() - 1);
  if (s.empty()) s = {1};
  return make_result(std::move(s), std::move(out), {x}, [r, c](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[i];
  });
}

Tensor pick_lastdim(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t r = x.rows(), c = x.cols();
  if (idx.size() != r)
    throw ShapeError("pick_lastdim: " + std::to_string(idx.size()) + " indices for " +
                     std::to_string(r) + " rows");
  std::vector<double> out(r);
  auto cols = std::make_shared<std::vector<std::size_t>>(idx.begin(), idx.end());
  for (std::size_t i = 0; i < r; ++i) {
    if (idx[i] >= c) throw ShapeError("pick_lastdim: index out of range");
    out[i] = x.at(i * c + idx[i]);
  }
  return make_result({r}, std::move(out), {x}, [r, c, cols](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i) gx[i * c + (*cols)[i]] += self.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Shape s = parts[0].shape();
  const std::size_t stride = parts[0].size() / s[0];
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != s.size() || p.size() / p.dim(0) != stride ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), s.begin() + 1))
      throw ShapeError("concat_rows: incompatible " + shape_string(p.shape()) + " vs " +
                       shape_string(s));
    total += p.dim(0);
  }
  s[0] = total;
  std::vector<double> out;
  out.reserve(total * stride);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    sizes.push_back(p.size());
  }
  return make_result(std::move(s), std::move(out), {parts.begin(), parts.end()},
                     [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (double* g = parent_grad(self, k))
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
      off += sizes[k];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
  require_matrix(x, "gather_rows");
  if (idx.empty()) throw ShapeError("gather_rows: no indices");
  const std::size_t c = x.cols();
  std::vector<double> out;
  out.reserve(idx.size() * c);
  for (auto r : idx) {
    if (r >= x.dim(0)) throw ShapeError("gather_rows: row index out of range");
    out.insert(out.end(), x.values().begin() + static_cast<std::ptrdiff_t>(r * c),
               x.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  }
  auto rows = std::make_shared<std::vector<std::size_t>>(idx.begin(), idx.end());
  return make_result({idx.size(), c}, std::move(out), {x}, [rows, c](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < rows->size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx[(*rows)[i] * c + j] += self.grad[i * c + j];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.dim(0))
    throw ShapeError("slice_rows: bad range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + shape_string(x.shape()));
  const std::size_t stride = x.size() / x.dim(0);
  Shape s = x.shape();
  s[0] = end - begin;
  std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          x.values().begin() + static_cast<std::ptrdiff_t>(end * stride));
  const std::size_t off = begin * stride;
  return make_result(std::move(s), std::move(out), {x}, [off](Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[off + i] += self.grad[i];
  });
}

Tensor bce_with_logits_rows(const Tensor& logits, std::span<const double> targets) {
  if (targets.size() != logits.size())
    throw ShapeError("bce_with_logits_rows: target count does not match " +
                     shape_string(logits.shape()));
  const std::size_t r = logits.rows(), c = logits.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double x = logits.at(i * c + j);
      const double t = targets[i * c + j];
      s += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    out[i] = s / static_cast<double>(c);
  }
  auto tgt = std::make_shared<std::vector<double>>(targets.begin(), targets.end());
  Shape s(logits.shape().begin(), logits.shape().end() - 1);
  if (s.empty()) s = {1};
  return make_result(std::move(s), std::move(out), {logits}, [r, c, tgt](Node& self) {
    double* gx = parent_grad(self, 0);
    const auto& xv = parent_value(self, 0);
    const double inv = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t k = i * c + j;
        const double p = 1.0 / (1.0 + std::exp(-xv[k]));
        gx[k] += self.grad[i] * (p - (*tgt)[k]) * inv;
      }
  });
}

}  // namespace mpseg
