#pragma once

// Reverse-mode automatic differentiation over dense float32 arrays.
//
// A Tensor is a shared handle to a graph Node. Operations record their parents
// and a backward closure while any input requires a gradient and grad mode is
// on; `backward()` replays the recorded graph in reverse node-id order.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ardhoi {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Zero-initialised on first use.
  float* grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value);
  static Tensor randn(Shape shape, std::mt19937_64& rng, float stddev = 1.0f, bool requires_grad = false);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, float lo, float hi, bool requires_grad = false);

  // Records an op result. Parents and `backward` are only kept when some
  // parent requires a gradient and grad mode is enabled.
  static Tensor make(Shape shape, std::vector<float> data, std::vector<Tensor> parents, const char* op,
                     std::function<void(Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const;
  std::size_t size() const { return node_->data.size(); }
  std::uint64_t id() const { return node_->id; }
  const char* op() const { return node_->op; }

  std::span<const float> data() const { return node_->data; }
  // Parameters and optimiser state only; graph values are immutable.
  std::span<float> mutable_data() { return node_->data; }
  std::span<const float> grad() const { return node_->grad; }
  std::span<float> mutable_grad() { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  float item() const;
  float operator[](std::size_t i) const { return node_->data[i]; }
  std::vector<float> to_vector() const { return node_->data; }

  // Same values, cut from the graph.
  Tensor detach() const;

  // Populates grad on every reachable tensor that requires one. Loss must be scalar.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Nodes reachable from a root, ordered so every parent precedes its children.
class Tape {
 public:
  static Tape record(const Tensor& root);
  const std::vector<Node*>& nodes() const { return nodes_; }

 private:
  std::vector<Node*> nodes_;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- ops ------------------------------------------------------------------

// [M,K] x [K,N]; a leading batch of the left operand is flattened: [...,K] x [K,N] -> [...,N].
Tensor matmul(const Tensor& a, const Tensor& b);
// [B,M,K] x [B,K,N]
Tensor bmm(const Tensor& a, const Tensor& b);

// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, float s);
Tensor add_scalar(const Tensor& x, float s);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// Normalises the last axis to zero mean / unit variance (no affine part).
Tensor layernorm(const Tensor& x, float eps = 1e-5f);
// Softmax over the last axis.
Tensor softmax(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, int axis);
Tensor mean_axis(const Tensor& x, int axis);
// Euclidean norm over the last axis; sqrt(sum x^2 + eps).
Tensor l2norm(const Tensor& x, float eps = 1e-8f);
// Maximum over the point axis: [P, C] -> [C] or [B, P, C] -> [B, C].
Tensor max_rows(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int begin, int end);
Tensor reshape(const Tensor& x, Shape shape);
// Swaps the last two axes.
Tensor transpose(const Tensor& x);
// Rows of x viewed as [dim0, rest]; repeated indices accumulate in backward.
Tensor gather_rows(const Tensor& x, std::span<const int> rows);

// Cumulative first-order scan along axis 0 of [L, C]: h[t] = a[t]*h[t-1] + b[t].
// `resets` lists rows where a new sequence starts. `sequential` runs the plain
// recurrence instead of the parallel scan.
enum class ScanMode { parallel, sequential };
Tensor linear_scan(const Tensor& a, const Tensor& b, std::span<const int> resets, ScanMode mode = ScanMode::parallel);
// Plain running sum along axis 0.
Tensor cumsum(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, float s) { return scale(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, float s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, float s) { return add_scalar(a, -s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace ardhoi
