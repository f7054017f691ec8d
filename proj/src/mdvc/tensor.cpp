#include "mdvc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mdvc/error.hpp"

namespace mdvc {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<TensorNode>;
using Backward = std::function<void(TensorNode&)>;

void check_finite(const std::vector<double>& values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::kNumericFault, std::string("non-finite value produced by ") + op);
    }
  }
}

Tensor finish(Shape shape, std::vector<double> data, std::vector<NodePtr> inputs,
              Backward backward_fn, const char* op) {
  check_finite(data, op);
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  Tape* tape = g_active_tape;
  const bool tracked =
      tape != nullptr &&
      std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& n) { return n->requires_grad; });
  if (tracked) {
    node->requires_grad = true;
    node->leaf = false;
    tape->record(node, std::move(backward_fn), inputs);
  }
  return Tensor::wrap(std::move(node));
}

std::vector<double>& grad_of(TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.data.size(), 0.0);
  return node.grad;
}

const TensorNode& require(const Tensor& t, const char* op) {
  if (!t.defined()) fail(ErrorCode::kContract, std::string(op) + ": undefined tensor");
  return *t.node();
}

[[noreturn]] void dim_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorCode::kDimension,
       std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != data.size()) {
    fail(ErrorCode::kDimension, "tensor: shape " + shape_str(shape) + " holds " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(data.size()));
  }
  check_finite(data, "tensor construction");
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor(Shape{n}, std::move(data));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return require(*this, "shape").shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    fail(ErrorCode::kIndex, "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return require(*this, "numel").data.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.front();
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::data() const { return require(*this, "data").data; }

std::span<double> Tensor::mutable_data() {
  require(*this, "mutable_data");
  if (!node_->leaf) fail(ErrorCode::kContract, "mutable_data: only leaf tensors may be mutated");
  return node_->data;
}

double Tensor::item() const {
  const auto& n = require(*this, "item");
  if (n.data.size() != 1) {
    fail(ErrorCode::kContract, "item: tensor " + shape_str(n.shape) + " is not a scalar");
  }
  return n.data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& n = require(*this, "at");
  if (n.shape.size() != 2) fail(ErrorCode::kDimension, "at: expected a matrix, got " + shape_str(n.shape));
  if (row >= n.shape[0] || col >= n.shape[1]) {
    fail(ErrorCode::kIndex, "at: (" + std::to_string(row) + ", " + std::to_string(col) +
                                ") out of range for " + shape_str(n.shape));
  }
  return n.data[row * n.shape[1] + col];
}

bool Tensor::requires_grad() const { return require(*this, "requires_grad").requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require(*this, "set_requires_grad");
  if (!node_->leaf) fail(ErrorCode::kContract, "set_requires_grad: not a leaf");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return require(*this, "is_leaf").leaf; }

bool Tensor::has_grad() const { return !require(*this, "has_grad").grad.empty(); }

std::span<const double> Tensor::grad() const { return require(*this, "grad").grad; }

void Tensor::zero_grad() {
  require(*this, "zero_grad");
  node_->grad.clear();
}

Tensor Tensor::clone() const {
  const auto& n = require(*this, "clone");
  Tensor copy(n.shape, n.data);
  copy.node_->requires_grad = n.leaf && n.requires_grad;
  return copy;
}

Tensor Tensor::detach() const {
  const auto& n = require(*this, "detach");
  return Tensor(n.shape, n.data);
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(std::shared_ptr<TensorNode> output, std::function<void(TensorNode&)> backward_fn,
                  std::span<const std::shared_ptr<TensorNode>> inputs) {
  if (consumed_) fail(ErrorCode::kContract, "tape: cannot record after backward");
  for (const auto& in : inputs) {
    if (in->leaf && in->requires_grad && leaf_set_.insert(in.get()).second) {
      leaves_.push_back(in);
    }
  }
  records_.push_back(Record{std::move(output), std::move(backward_fn)});
}

GradScope::GradScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

GradScope::~GradScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() noexcept { return g_active_tape; }

void backward(const Tensor& loss, Tape& tape) {
  const auto& loss_node = require(loss, "backward");
  if (loss_node.data.size() != 1) {
    fail(ErrorCode::kContract, "backward: loss must be a scalar, got " + shape_str(loss_node.shape));
  }
  if (tape.records_.empty()) fail(ErrorCode::kContract, "backward: tape is empty");
  if (tape.consumed_) fail(ErrorCode::kContract, "backward: tape already consumed");
  if (loss_node.leaf) fail(ErrorCode::kContract, "backward: loss was not produced on this tape");
  for (const auto& leaf : tape.leaves_) {
    if (!leaf->grad.empty()) {
      fail(ErrorCode::kContract,
           "backward: leaf gradient " + shape_str(leaf->shape) + " not reset; call zero_grad");
    }
  }
  tape.consumed_ = true;
  loss.node()->grad.assign(1, 1.0);
  for (auto it = tape.records_.rbegin(); it != tape.records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(*it->output);
  }
  for (const auto& leaf : tape.leaves_) {
    if (leaf->grad.empty()) leaf->grad.assign(leaf->data.size(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& an = require(a, "matmul");
  const auto& bn = require(b, "matmul");
  if (an.shape.size() != 2 || bn.shape.size() != 2 || an.shape[1] != bn.shape[0]) {
    dim_error("matmul", an.shape, bn.shape);
  }
  const std::size_t m = an.shape[0], k = an.shape[1], n = bn.shape[1];
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = an.data[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bn.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  auto a_node = a.node(), b_node = b.node();
  return finish(
      {m, n}, std::move(out), {a_node, b_node},
      [a_node, b_node, m, k, n](TensorNode& o) {
        const auto& g = o.grad;
        if (a_node->requires_grad) {
          auto& ga = grad_of(*a_node);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = b_node->data.data() + p * n;
              const double* grow = g.data() + i * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (b_node->requires_grad) {
          auto& gb = grad_of(*b_node);
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g.data() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double av = a_node->data[i * k + p];
              if (av == 0.0) continue;
              double* gbrow = gb.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      },
      "matmul");
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto& an = require(a, "add");
  const auto& bn = require(b, "add");
  auto a_node = a.node(), b_node = b.node();
  if (an.shape == bn.shape) {
    std::vector<double> out(an.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = an.data[i] + bn.data[i];
    return finish(an.shape, std::move(out), {a_node, b_node},
                  [a_node, b_node](TensorNode& o) {
                    for (auto* in : {a_node.get(), b_node.get()}) {
                      if (!in->requires_grad) continue;
                      auto& g = grad_of(*in);
                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                    }
                  },
                  "add");
  }
  if (bn.shape.size() == 1 && !an.shape.empty() && an.shape.back() == bn.shape[0]) {
    const std::size_t width = bn.shape[0];
    std::vector<double> out(an.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = an.data[i] + bn.data[i % width];
    return finish(an.shape, std::move(out), {a_node, b_node},
                  [a_node, b_node, width](TensorNode& o) {
                    if (a_node->requires_grad) {
                      auto& g = grad_of(*a_node);
                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                    }
                    if (b_node->requires_grad) {
                      auto& g = grad_of(*b_node);
                      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % width] += o.grad[i];
                    }
                  },
                  "add");
  }
  dim_error("add", an.shape, bn.shape);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto& an = require(a, "mul");
  const auto& bn = require(b, "mul");
  if (an.shape != bn.shape) dim_error("mul", an.shape, bn.shape);
  std::vector<double> out(an.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an.data[i] * bn.data[i];
  auto a_node = a.node(), b_node = b.node();
  return finish(an.shape, std::move(out), {a_node, b_node},
                [a_node, b_node](TensorNode& o) {
                  if (a_node->requires_grad) {
                    auto& g = grad_of(*a_node);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * b_node->data[i];
                  }
                  if (b_node->requires_grad) {
                    auto& g = grad_of(*b_node);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * a_node->data[i];
                  }
                },
                "mul");
}

Tensor scale(const Tensor& x, double factor) {
  const auto& xn = require(x, "scale");
  std::vector<double> out(xn.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn.data[i] * factor;
  auto x_node = x.node();
  return finish(xn.shape, std::move(out), {x_node},
                [x_node, factor](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
                },
                "scale");
}

Tensor relu(const Tensor& x) {
  const auto& xn = require(x, "relu");
  std::vector<double> out(xn.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xn.data[i] > 0.0 ? xn.data[i] : 0.0;
  auto x_node = x.node();
  return finish(xn.shape, std::move(out), {x_node},
                [x_node](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x_node->data[i] > 0.0) g[i] += o.grad[i];
                  }
                },
                "relu");
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorCode::kDimension, "concat: no inputs");
  const Shape& first = require(parts.front(), "concat").shape;
  if (first.empty()) fail(ErrorCode::kDimension, "concat: scalar inputs cannot be concatenated");
  const Shape lead(first.begin(), first.end() - 1);
  const std::size_t outer = shape_numel(lead);
  std::vector<std::size_t> widths;
  std::vector<NodePtr> nodes;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = require(p, "concat").shape;
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      dim_error("concat", first, s);
    }
    widths.push_back(s.back());
    total += s.back();
    nodes.push_back(p.node());
  }
  std::vector<double> out(outer * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = nodes[k]->data;
    for (std::size_t r = 0; r < outer; ++r) {
      std::copy_n(src.begin() + r * widths[k], widths[k], out.begin() + r * total + offset);
    }
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return finish(std::move(shape), std::move(out), nodes,
                [nodes, widths, outer, total](TensorNode& o) {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < nodes.size(); ++k) {
                    if (nodes[k]->requires_grad) {
                      auto& g = grad_of(*nodes[k]);
                      for (std::size_t r = 0; r < outer; ++r) {
                        for (std::size_t c = 0; c < widths[k]; ++c) {
                          g[r * widths[k] + c] += o.grad[r * total + off + c];
                        }
                      }
                    }
                    off += widths[k];
                  }
                },
                "concat");
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  const auto& tn = require(table, "embedding");
  if (tn.shape.size() != 2) fail(ErrorCode::kDimension, "embedding: table must be a matrix, got " + shape_str(tn.shape));
  const std::size_t rows = tn.shape[0], width = tn.shape[1];
  std::vector<double> out(ids.size() * width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      fail(ErrorCode::kIndex, "embedding: id " + std::to_string(ids[i]) + " >= table rows " +
                                  std::to_string(rows));
    }
    std::copy_n(tn.data.begin() + ids[i] * width, width, out.begin() + i * width);
  }
  auto t_node = table.node();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return finish({ids.size(), width}, std::move(out), {t_node},
                [t_node, idx, width](TensorNode& o) {
                  auto& g = grad_of(*t_node);
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (std::size_t c = 0; c < width; ++c) g[idx[i] * width + c] += o.grad[i * width + c];
                  }
                },
                "embedding");
}

Tensor transpose(const Tensor& x) {
  const auto& xn = require(x, "transpose");
  if (xn.shape.size() < 2) fail(ErrorCode::kDimension, "transpose: rank < 2 " + shape_str(xn.shape));
  const std::size_t r = xn.shape[xn.shape.size() - 2], c = xn.shape.back();
  const std::size_t batch = xn.data.size() / std::max<std::size_t>(r * c, 1);
  std::vector<double> out(xn.data.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = xn.data[b * r * c + i * c + j];
    }
  }
  Shape shape = xn.shape;
  std::swap(shape[shape.size() - 2], shape.back());
  auto x_node = x.node();
  return finish(std::move(shape), std::move(out), {x_node},
                [x_node, batch, r, c](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < c; ++j) g[b * r * c + i * c + j] += o.grad[b * r * c + j * r + i];
                    }
                  }
                },
                "transpose");
}

Tensor softmax(const Tensor& x, int axis, const Mask* mask) {
  const auto& xn = require(x, "softmax");
  const int rank = static_cast<int>(xn.shape.size());
  if (rank == 0) fail(ErrorCode::kDimension, "softmax: scalar input");
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) {
    fail(ErrorCode::kParameter, "softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(xn.shape));
  }
  std::size_t mask_numel = 0;
  if (mask != nullptr) {
    const Shape& ms = mask->shape;
    const bool suffix = ms.size() <= xn.shape.size() &&
                        std::equal(ms.rbegin(), ms.rend(), xn.shape.rbegin());
    if (!suffix || ms.empty()) dim_error("softmax mask", ms, xn.shape);
    mask_numel = shape_numel(ms);
    if (mask->keep.size() != mask_numel) dim_error("softmax mask", ms, xn.shape);
  }
  const std::size_t len = xn.shape[ax];
  std::size_t inner = 1;
  for (int d = ax + 1; d < rank; ++d) inner *= xn.shape[d];
  const std::size_t outer = xn.data.size() / std::max<std::size_t>(len * inner, 1);
  std::vector<double> out(xn.data.size());
  std::vector<double> logits(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      bool any = false;
      double peak = kMaskedLogit;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t idx = base + k * inner;
        const bool keep = mask == nullptr || mask->keep[idx % mask_numel] != 0;
        logits[k] = keep ? xn.data[idx] : kMaskedLogit;
        if (keep) {
          peak = any ? std::max(peak, logits[k]) : logits[k];
          any = true;
        }
      }
      if (!any) fail(ErrorCode::kDegenerateMask, "softmax: slice has every entry masked");
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        logits[k] = std::exp(logits[k] - peak);
        total += logits[k];
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] = logits[k] / total;
    }
  }
  auto x_node = x.node();
  return finish(xn.shape, std::move(out), {x_node},
                [x_node, outer, inner, len](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t a = 0; a < outer; ++a) {
                    for (std::size_t in = 0; in < inner; ++in) {
                      const std::size_t base = a * len * inner + in;
                      double dot = 0.0;
                      for (std::size_t k = 0; k < len; ++k) {
                        dot += o.grad[base + k * inner] * o.data[base + k * inner];
                      }
                      for (std::size_t k = 0; k < len; ++k) {
                        const std::size_t idx = base + k * inner;
                        g[idx] += o.data[idx] * (o.grad[idx] - dot);
                      }
                    }
                  }
                },
                "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
  const auto& xn = require(x, "layer_norm");
  const auto& gn = require(gain, "layer_norm");
  const auto& bn = require(bias, "layer_norm");
  if (xn.shape.empty()) fail(ErrorCode::kDimension, "layer_norm: scalar input");
  const std::size_t width = xn.shape.back();
  if (gn.shape != Shape{width}) dim_error("layer_norm gain", gn.shape, xn.shape);
  if (bn.shape != Shape{width}) dim_error("layer_norm bias", bn.shape, xn.shape);
  const std::size_t rows = width == 0 ? 0 : xn.data.size() / width;
  std::vector<double> out(xn.data.size());
  std::vector<double> normalized(xn.data.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xn.data.data() + r * width;
    double mean = 0.0;
    for (std::size_t c = 0; c < width; ++c) mean += row[c];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t c = 0; c < width; ++c) {
      const double xh = (row[c] - mean) * inv_std[r];
      normalized[r * width + c] = xh;
      out[r * width + c] = xh * gn.data[c] + bn.data[c];
    }
  }
  auto x_node = x.node(), g_node = gain.node(), b_node = bias.node();
  return finish(
      xn.shape, std::move(out), {x_node, g_node, b_node},
      [x_node, g_node, b_node, normalized = std::move(normalized), inv_std = std::move(inv_std), rows,
       width](TensorNode& o) {
        if (g_node->requires_grad) {
          auto& gg = grad_of(*g_node);
          for (std::size_t i = 0; i < o.grad.size(); ++i) gg[i % width] += o.grad[i] * normalized[i];
        }
        if (b_node->requires_grad) {
          auto& gb = grad_of(*b_node);
          for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % width] += o.grad[i];
        }
        if (x_node->requires_grad) {
          auto& gx = grad_of(*x_node);
          const double n = static_cast<double>(width);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t c = 0; c < width; ++c) {
              const double d = o.grad[r * width + c] * g_node->data[c];
              mean_d += d;
              mean_dx += d * normalized[r * width + c];
            }
            mean_d /= n;
            mean_dx /= n;
            for (std::size_t c = 0; c < width; ++c) {
              const double d = o.grad[r * width + c] * g_node->data[c];
              gx[r * width + c] += inv_std[r] * (d - mean_d - normalized[r * width + c] * mean_dx);
            }
          }
        }
      },
      "layer_norm");
}

Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
  require(x, "dropout");
  if (!(p >= 0.0 && p < 1.0)) {
    fail(ErrorCode::kParameter, "dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return x;
  const auto& xn = *x.node();
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> factor(xn.data.size());
  std::vector<double> out(xn.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    factor[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] = xn.data[i] * factor[i];
  }
  auto x_node = x.node();
  return finish(xn.shape, std::move(out), {x_node},
                [x_node, factor = std::move(factor)](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor[i];
                },
                "dropout");
}

Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t seed) {
  Rng rng(seed);
  return dropout(x, p, mode, rng);
}

Tensor log_clamped(const Tensor& x, double floor) {
  const auto& xn = require(x, "log");
  if (!(floor > 0.0)) fail(ErrorCode::kParameter, "log: clamp floor must be positive");
  std::vector<double> out(xn.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(xn.data[i], floor));
  auto x_node = x.node();
  return finish(xn.shape, std::move(out), {x_node},
                [x_node, floor](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x_node->data[i] > floor) g[i] += o.grad[i] / x_node->data[i];
                  }
                },
                "log");
}

Tensor sum(const Tensor& x) {
  const auto& xn = require(x, "sum");
  double total = 0.0;
  for (double v : xn.data) total += v;
  auto x_node = x.node();
  return finish({}, {total}, {x_node},
                [x_node](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (double& v : g) v += o.grad[0];
                },
                "sum");
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const auto& xn = require(x, "slice_rows");
  if (xn.shape.size() != 2) fail(ErrorCode::kDimension, "slice_rows: expected a matrix, got " + shape_str(xn.shape));
  if (begin > end || end > xn.shape[0]) {
    fail(ErrorCode::kIndex, "slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") out of range for " + shape_str(xn.shape));
  }
  const std::size_t width = xn.shape[1];
  std::vector<double> out(xn.data.begin() + begin * width, xn.data.begin() + end * width);
  auto x_node = x.node();
  return finish({end - begin, width}, std::move(out), {x_node},
                [x_node, begin, width](TensorNode& o) {
                  auto& g = grad_of(*x_node);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * width + i] += o.grad[i];
                },
                "slice_rows");
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::parameter({rows, cols}, std::move(values));
}

}  // namespace mdvc
