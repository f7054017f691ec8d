#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "mdvc/rng.hpp"

namespace mdvc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward writes it
  bool requires_grad = false;
  bool leaf = true;
};

// Shared handle onto a dense row-major float64 array. Copies alias the same
// storage; use clone() for an independent value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor vector(std::vector<double> data);
  // Trainable leaf.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::size_t rows() const;  // leading extent of a matrix
  std::size_t cols() const;  // trailing extent

  std::span<const double> data() const;
  // Direct write access; only leaves may be mutated.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  Tensor clone() const;
  // Copy of the values with no graph participation.
  Tensor detach() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<TensorNode> node) { return Tensor(std::move(node)); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  std::shared_ptr<TensorNode> node_;
};

// Ordered record of differentiable operations executed while the tape is
// active on the current thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const noexcept { return records_.size(); }
  bool consumed() const noexcept { return consumed_; }

  void record(std::shared_ptr<TensorNode> output,
              std::function<void(TensorNode&)> backward,
              std::span<const std::shared_ptr<TensorNode>> inputs);

 private:
  struct Record {
    std::shared_ptr<TensorNode> output;
    std::function<void(TensorNode&)> backward;
  };

  friend void backward(const Tensor& loss, Tape& tape);

  std::vector<Record> records_;
  std::vector<std::shared_ptr<TensorNode>> leaves_;
  std::unordered_set<const TensorNode*> leaf_set_;
  bool consumed_ = false;
};

// Activates a tape on the current thread for the lifetime of the scope.
class GradScope {
 public:
  explicit GradScope(Tape& tape);
  ~GradScope();
  GradScope(const GradScope&) = delete;
  GradScope& operator=(const GradScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on the current thread for the lifetime of the scope.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

// Populates grad on every requires_grad leaf reached by the tape. A tape runs
// backward once; leaves must have been zero_grad()'ed beforehand.
void backward(const Tensor& loss, Tape& tape);

// Boolean mask; nonzero = keep. Its shape must equal the tensor shape or a
// trailing suffix of it (broadcast over leading axes).
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;
};

enum class Mode { kTrain, kEval };

inline constexpr double kMaskedLogit = -1e9;
inline constexpr double kLayerNormEpsilon = 1e-5;

Tensor matmul(const Tensor& a, const Tensor& b);
// Same-shape add, or row-broadcast of a rank-1 b over the last axis of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor concat_last(const std::vector<Tensor>& parts);
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);
Tensor transpose(const Tensor& x);
Tensor softmax(const Tensor& x, int axis = -1, const Mask* mask = nullptr);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = kLayerNormEpsilon);
Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng);
Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t seed);
Tensor log_clamped(const Tensor& x, double floor = 1e-12);
Tensor sum(const Tensor& x);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Glorot-uniform trainable matrix, bounds +-sqrt(6 / (rows + cols)).
Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace mdvc
