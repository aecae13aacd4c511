#ifndef RMP_AUTODIFF_HPP_
#define RMP_AUTODIFF_HPP_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rmp/tensor.hpp"

namespace rmp {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& val() const;
  const Shape& shape() const;
};

enum class PoolMode { kMax, kAvg };
enum class UpsampleMode { kNearest, kBilinear };

// Records forward primitives in execution order; backward() replays the
// closures in exact reverse order. Tensors on the tape are never mutated
// in place once recorded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor t, bool requires_grad = false);
  // Registered parameter leaf; gradients retrievable by name after backward().
  Value param(const std::string& name, const Tensor& t);

  const Tensor& value(Value v) const { return nodes_[v.id].val; }
  const Tensor& grad(Value v) const;

  // Seeds d(loss)/d(loss) = 1 and runs the tape backwards. `loss` must be a
  // scalar node; calling twice without re-recording is an error.
  void backward(Value loss);

  bool has_param(const std::string& name) const { return param_ids_.count(name) != 0; }
  const Tensor& param_grad(const std::string& name) const;
  // Gradients of all registered parameters, in registration order.
  std::vector<std::pair<std::string, Tensor>> param_grads() const;

  int size() const { return static_cast<int>(nodes_.size()); }

  // Node-level plumbing for the primitive op implementations.
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  int push_node(Tensor val, bool needs_grad);
  void set_backward(int id, std::function<void(Tape&)> fn) { nodes_[id].back = std::move(fn); }
  const Tensor& node_val(int id) const { return nodes_[id].val; }
  const Tensor& node_grad(int id) const { return nodes_[id].grad; }
  Tensor& grad_buf(int id);
  void accumulate(int id, const Tensor& g);

 private:
  struct Node {
    Tensor val;
    Tensor grad;  // allocated on demand
    std::function<void(Tape&)> back;
    bool needs_grad = false;
    bool grad_ready = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
  std::vector<std::string> param_order_;
  bool backward_done_ = false;
};

// --- primitive ops -----------------------------------------------------
// All ops validate shapes, check outputs for NaN/Inf and register a
// backward closure when any input requires gradients.

// 2D convolution, stride 1, zero "same" padding, odd kernel.
// x: HxWxCin, k: KxKxCinxCout, b: Cout.
Value conv2d(Value x, Value k, Value b);

// 2x2 pooling; H and W must be even. Max-pool backward routes the gradient
// to the first maximal cell in row-major window order.
Value pool2d(Value x, PoolMode mode);

// Factor-2 upsampling; bilinear uses the align-corners-false convention.
Value upsample2d(Value x, UpsampleMode mode);

Value sigmoid(Value x);
Value tanh_act(Value x);
Value relu(Value x);

Value add(Value a, Value b);
Value hadamard(Value a, Value b);
Value concat_channels(const std::vector<Value>& xs);

Value sum_all(Value x);          // -> 1-element tensor
Value scale(Value x, double c);  // x * c, c constant

// Mean over pixels of w[label(p)] * (-log softmax(logits(p))[label(p)]).
// logits: HxWxQ; labels: row-major length H*W, each in [0,Q).
Value weighted_softmax_ce(Value logits, const std::vector<int>& labels,
                          const std::vector<double>& class_weights);

// Row-wise softmax over the channel axis of HxWxQ (used by the loss and by
// probability outputs; numerically stabilized by max subtraction).
Tensor softmax_rows(const Tensor& logits);

namespace detail {
void check_finite(const Tensor& t, const char* op);
}

}  // namespace rmp

#endif  // RMP_AUTODIFF_HPP_
