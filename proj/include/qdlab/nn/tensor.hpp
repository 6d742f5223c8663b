#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qdlab/rng.hpp"

namespace qdlab::nn {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;  // sized lazily; same length as value once present
    std::vector<NodePtr> parents;
    std::function<void()> backward_fn;
    bool requires_grad = false;

    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
    }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

/// Handle to an autodiff graph node. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<float> data, std::vector<int> shape,
                       bool requires_grad = false);
    static Tensor randn(std::vector<int> shape, float stddev, Rng& rng);  // parameter init

    Node& node() { return *node_; }
    const Node& node() const { return *node_; }
    NodePtr ptr() const { return node_; }
    bool valid() const { return node_ != nullptr; }

    const std::vector<int>& shape() const { return node_->shape; }
    std::vector<float>& value() { return node_->value; }
    const std::vector<float>& value() const { return node_->value; }
    std::vector<float>& grad() { return node_->grad; }
    float scalar() const { return node_->value.at(0); }

private:
    NodePtr node_;
};

// While a guard is alive, new ops record no parents and no backward
// functions (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// ---- ops (forward + backward) ----

// C = op(A) * op(B); transA && transB unsupported.
Tensor matmul(const Tensor& a, const Tensor& b, bool transA = false, bool transB = false);
Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor add_bias(const Tensor& x, const Tensor& bias);   // bias [N] broadcast over rows of [M x N]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);           // elementwise
Tensor scale(const Tensor& x, float s);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor softmax_last_dim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);
Tensor dropout(const Tensor& x, float p, Rng& rng);     // identity when p == 0

// Fused multi-head causal self-attention over pre-projected q/k/v [L x d]:
// per head, scores are scaled dot products over the causal prefix only,
// softmax-normalized (max-subtracted) and optionally dropout-masked, then
// applied to v. Heads are returned side by side as [L x d]. Equivalent to
// per-head slice / masked softmax / matmul / concat, but it never touches
// positions above the diagonal.
Tensor causal_self_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                             float scale, float dropout_p = 0.0f, Rng* rng = nullptr);
Tensor mean_all(const Tensor& x);                        // scalar
Tensor sum_all(const Tensor& x);                         // scalar
Tensor transpose(const Tensor& x);                       // 2-D
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& xs);
// rows gathered by index; works as embedding lookup on a parameter table
Tensor gather_rows(const Tensor& x, const std::vector<int>& indices);
// interleaves rows from several sources following (source, row) pattern
Tensor assemble_rows(const std::vector<Tensor>& sources,
                     const std::vector<std::pair<int, int>>& pattern);
// mean of (pred - target)^2 over all elements; target carries no gradient
Tensor mse_loss(const Tensor& pred, const std::vector<float>& target);

// Reverse-mode accumulation from a scalar loss. Gradients of all
// reachable requires_grad nodes are accumulated (explicit zeroing is the
// caller's job between steps).
void backward(const Tensor& loss);

}  // namespace qdlab::nn
