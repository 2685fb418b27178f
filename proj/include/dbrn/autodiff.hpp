#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dbrn::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Node;
using Tensor = std::shared_ptr<Node>;

// Dense double tensor participating in a reverse-mode graph. Values are
// immutable once built; grads mutate only during backward (and accumulate
// across repeated backward calls until zeroed).
class Node {
 public:
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Tensor> parents;
  std::function<void(Node&)> backprop;

  std::size_t size() const { return value.size(); }
  bool is_scalar() const { return value.size() == 1; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

Tensor constant(Shape shape, std::vector<double> value);
Tensor constant_scalar(double v);
Tensor param(Shape shape, std::vector<double> value);  // requires_grad leaf

// elementwise, numpy-style broadcasting
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact Gaussian-CDF form

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& a);                // 2-D
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);
Tensor group_norm(const Tensor& a, std::size_t groups, const Tensor& gain,
                  const Tensor& bias);  // a: [N, C, L]

// x: [N, Cin, L], w: [Cout, Cin, K], b: [Cout]
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride, std::size_t pad);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis);  // keeps the dim as 1

// Mean Huber loss over selected elements. mask (optional) broadcasts against
// pred and weights both the numerator and the element count; pred and target
// must have identical shapes.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta,
                 const Tensor& mask = nullptr);

// logits: [B, K]; mean negative log-likelihood
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

// Reverse-topological traversal from a scalar loss. Parameter grads accumulate;
// call zero_grad between steps.
void backward(const Tensor& loss);
void zero_grad(const Tensor& t);

constexpr double kLayerNormEps = 1e-8;
constexpr double kGroupNormEps = 1e-5;

}  // namespace dbrn::ag
