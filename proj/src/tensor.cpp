#include "ardhoi/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace ardhoi {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

float* Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad.data();
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  if (numel(shape) != data.size())
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->id = g_next_id.fetch_add(1);
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::scalar(float value) { return from({}, {value}); }

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, float stddev, bool requires_grad) {
  std::normal_distribution<float> dist(0.0f, stddev);
  std::vector<float> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, float lo, float hi, bool requires_grad) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::make(Shape shape, std::vector<float> data, std::vector<Tensor> parents, const char* op,
                    std::function<void(Node&)> backward) {
  Tensor out = from(std::move(shape), std::move(data));
  out.node_->op = op;
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward = std::move(backward);
  return out;
}

int Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("axis out of range for shape " + shape_str(shape()));
  return node_->shape[static_cast<std::size_t>(axis)];
}

float Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return from(node_->shape, node_->data); }

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    tape.nodes_.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(tape.nodes_.begin(), tape.nodes_.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
  return tape;
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  if (!requires_grad()) return;
  const Tape tape = Tape::record(*this);
  for (Node* n : tape.nodes()) n->grad_buffer();
  node_->grad[0] += 1.0f;
  const auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace ardhoi
