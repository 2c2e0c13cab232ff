#pragma once

// Minimal reverse-mode differentiation over dense row-major tensors.
//
// Every op treats a tensor as a matrix: the trailing dimension is the column
// count and all leading dimensions are flattened into rows. Sequences are
// stored as (batch * seq_len) x channels with time running fastest inside
// each batch element.

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace reem::diff {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double item() const;

  Eigen::Map<RowMatrix> mat();
  Eigen::Map<const RowMatrix> mat() const;

  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Shape& shape);

/// Named learnable tensors, iterated in insertion order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  Tensor& add(std::string name, Tensor init);
  /// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
  Tensor& add_glorot(std::string name, Shape shape, std::size_t fan_in, std::size_t fan_out,
                     std::mt19937_64& rng);
  Tensor& add_zeros(std::string name, Shape shape);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;
  bool same_layout(const ParameterSet& other) const;

  /// Copy of every entry whose name starts with `prefix`.
  ParameterSet subset(std::string_view prefix) const;
  /// Overwrite the values of matching entries in this set with those of `other`.
  void assign_from(const ParameterSet& other);
  void merge(const ParameterSet& other);

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  std::string to_json_string() const;
  static ParameterSet from_json_string(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ParameterSet load(const std::filesystem::path& path);

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Gradients keyed by variable name.
using GradientMap = std::map<std::string, Tensor>;

class Tape;

class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records a forward computation; one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Named differentiable leaf. Re-registering a name returns the same node.
  Var variable(const std::string& name, Tensor value);
  Var parameter(const ParameterSet& params, const std::string& name);

  /// Reverse sweep from a scalar output. Returns d(output)/d(leaf) for
  /// every named leaf recorded on this tape.
  GradientMap backward(Var output);

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  std::string_view op_name(int id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Concatenated branch flags of every piecewise op (relu active, clamp
  /// inside bounds). Two evaluations with different signatures straddle a
  /// non-differentiable point.
  std::vector<char> branch_signature() const;

  // Op-author interface.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(std::string_view op, Tensor value, const std::vector<Var>& parents, BackwardFn fn);
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad_buffer(int id);
  void set_branch(int id, std::vector<char> flags) { nodes_[static_cast<std::size_t>(id)].branch = std::move(flags); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::string name;
    std::vector<char> branch;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> named_;
};

// ---- ops ----------------------------------------------------------------

Var matmul(Var a, Var b);
/// Per-block product: a is (batch*m x k), b is (batch*k x n), or
/// (batch*n x k) when transpose_b.
Var batched_matmul(Var a, Var b, std::size_t batch, bool transpose_b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Adds a 1 x C bias to every row.
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// Elementwise product with a non-differentiable tensor of the same shape.
Var mul_const(Var a, const Tensor& c);
/// Multiplies each row r by c[r]; c has one entry per row.
Var scale_rows(Var a, std::span<const double> c);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// log(sigmoid(a)), computed without overflow.
Var log_sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var lgamma(Var a);
Var square(Var a);
/// Clamp into [lo, hi]; zero gradient where clamped.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
/// R x C -> R x 1.
Var row_sum(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var select_rows(Var a, std::vector<std::size_t> rows);

/// Row-wise softmax with max subtraction. `mask` is R x C of 0/1; masked-out
/// entries are exactly zero. Every row needs at least one unmasked entry.
Var masked_softmax(Var logits, const Tensor& mask);
Var softmax_rows(Var logits);

/// Dilated causal convolution over sequences of length `seq_len` packed as
/// (batch*seq_len x c_in). weight is {K, c_in, c_out}; tap k reads input at
/// t - (K-1-k)*dilation, with zeros before the sequence start.
Var causal_conv1d(Var input, Var weight, Var bias, std::size_t dilation, std::size_t seq_len);

// ---- non-recorded helpers --------------------------------------------------

Tensor masked_softmax_values(const Tensor& logits, const Tensor& mask);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam that climbs the objective (gradient ascent).
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void ascend(ParameterSet& params, const GradientMap& grads);
  void set_lr(double lr) noexcept { config_.lr = lr; }
  double lr() const noexcept { return config_.lr; }
  long steps() const noexcept { return steps_; }

 private:
  AdamConfig config_;
  std::map<std::string, Tensor> first_;
  std::map<std::string, Tensor> second_;
  long steps_ = 0;
};

}  // namespace reem::diff
