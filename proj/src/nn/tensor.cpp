#include "qdlab/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "qdlab/nn/kernels.hpp"

namespace qdlab::nn {

namespace {

thread_local int g_no_grad_depth = 0;

NodePtr make_node(std::vector<int> shape) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(n->numel(), 0.0f);
    return n;
}

bool track(const std::initializer_list<const Tensor*>& parents) {
    if (g_no_grad_depth > 0) return false;
    for (const Tensor* p : parents)
        if (p->node().requires_grad) return true;
    return false;
}

void attach(const NodePtr& out, std::initializer_list<const Tensor*> parents,
            std::function<void()> fn) {
    out->requires_grad = true;
    for (const Tensor* p : parents) out->parents.push_back(p->ptr());
    out->backward_fn = std::move(fn);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        std::string msg = std::string(op) + ": shape mismatch [";
        for (int d : a.shape()) msg += std::to_string(d) + " ";
        msg += "] vs [";
        for (int d : b.shape()) msg += std::to_string(d) + " ";
        msg += "]";
        throw std::invalid_argument(msg);
    }
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto n = make_node(std::move(shape));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from(std::vector<float> data, std::vector<int> shape, bool requires_grad) {
    auto n = make_node(std::move(shape));
    if (data.size() != n->numel()) throw std::invalid_argument("Tensor::from: data/shape mismatch");
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::randn(std::vector<int> shape, float stddev, Rng& rng) {
    auto n = make_node(std::move(shape));
    for (auto& v : n->value) v = static_cast<float>(rng.normal(0.0, stddev));
    n->requires_grad = true;
    return Tensor(n);
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transA, bool transB) {
    if (transA && transB) throw std::invalid_argument("matmul: transA && transB unsupported");
    if (a.shape().size() != 2 || b.shape().size() != 2)
        throw std::invalid_argument("matmul: operands must be 2-D");
    const int M = transA ? a.shape()[1] : a.shape()[0];
    const int Ka = transA ? a.shape()[0] : a.shape()[1];
    const int Kb = transB ? b.shape()[1] : b.shape()[0];
    const int N = transB ? b.shape()[0] : b.shape()[1];
    if (Ka != Kb)
        throw std::invalid_argument("matmul: inner dimensions disagree (" + std::to_string(Ka) +
                                    " vs " + std::to_string(Kb) + ")");
    const int K = Ka;
    auto out = make_node({M, N});
    gemm(M, N, K, a.value().data(), a.shape()[1], transA, b.value().data(), b.shape()[1], transB,
         out->value.data(), N, false);

    if (track({&a, &b})) {
        Node* o = out.get();
        NodePtr an = a.ptr(), bn = b.ptr();
        attach(out, {&a, &b}, [o, an, bn, M, N, K, transA, transB]() {
            const float* dC = o->grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                if (!transA && !transB)  // dA += dC * B^T
                    gemm(M, K, N, dC, N, false, bn->value.data(), N, true, an->grad.data(), K, true);
                else if (!transA && transB)  // C = A B^T: dA += dC * B
                    gemm(M, K, N, dC, N, false, bn->value.data(), K, false, an->grad.data(), K, true);
                else  // C = A^T B: dA[k,m] += sum_n B[k,n] dC[m,n]  => dA = B * dC^T
                    gemm(K, M, N, bn->value.data(), N, false, dC, N, true, an->grad.data(), M, true);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                if (!transA && !transB)  // dB += A^T dC
                    gemm(K, N, M, an->value.data(), K, true, dC, N, false, bn->grad.data(), N, true);
                else if (!transA && transB)  // C = A B^T: dB[n,k] += sum_m dC[m,n] A[m,k] => dB = dC^T A
                    gemm(N, K, M, dC, N, true, an->value.data(), K, false, bn->grad.data(), K, true);
                else  // C = A^T B: dB += A dC
                    gemm(K, N, M, an->value.data(), M, false, dC, N, false, bn->grad.data(), N, true);
            }
        });
    }
    return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = make_node(a.shape());
    const std::size_t n = out->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = a.value()[i] + b.value()[i];
    if (track({&a, &b})) {
        Node* o = out.get();
        NodePtr an = a.ptr(), bn = b.ptr();
        attach(out, {&a, &b}, [o, an, bn, n]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += o->grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    const int M = x.node().rows(), N = x.node().cols();
    if (bias.shape().size() != 1 || bias.shape()[0] != N)
        throw std::invalid_argument("add_bias: bias length must equal column count");
    auto out = make_node(x.shape());
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
            out->value[static_cast<std::size_t>(m) * N + n] =
                x.value()[static_cast<std::size_t>(m) * N + n] + bias.value()[n];
    if (track({&x, &bias})) {
        Node* o = out.get();
        NodePtr xn = x.ptr(), bn = bias.ptr();
        attach(out, {&x, &bias}, [o, xn, bn, M, N]() {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += o->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int m = 0; m < M; ++m)
                    for (int n = 0; n < N; ++n)
                        bn->grad[n] += o->grad[static_cast<std::size_t>(m) * N + n];
            }
        });
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto out = make_node(a.shape());
    const std::size_t n = out->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = a.value()[i] - b.value()[i];
    if (track({&a, &b})) {
        Node* o = out.get();
        NodePtr an = a.ptr(), bn = b.ptr();
        attach(out, {&a, &b}, [o, an, bn, n]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= o->grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto out = make_node(a.shape());
    const std::size_t n = out->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = a.value()[i] * b.value()[i];
    if (track({&a, &b})) {
        Node* o = out.get();
        NodePtr an = a.ptr(), bn = b.ptr();
        attach(out, {&a, &b}, [o, an, bn, n]() {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += o->grad[i] * an->value[i];
            }
        });
    }
    return Tensor(out);
}

Tensor scale(const Tensor& x, float s) {
    auto out = make_node(x.shape());
    const std::size_t n = out->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = x.value()[i] * s;
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, s, n]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += o->grad[i] * s;
        });
    }
    return Tensor(out);
}

Tensor relu(const Tensor& x) {
    auto out = make_node(x.shape());
    const std::size_t n = out->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = x.value()[i] > 0.0f ? x.value()[i] : 0.0f;
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, n]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                if (xn->value[i] > 0.0f) xn->grad[i] += o->grad[i];
        });
    }
    return Tensor(out);
}

Tensor gelu(const Tensor& x) {
    auto out = make_node(x.shape());
    const std::size_t n = out->numel();
    constexpr float inv_sqrt2 = 0.70710678118654752f;
    for (std::size_t i = 0; i < n; ++i) {
        float v = x.value()[i];
        out->value[i] = 0.5f * v * (1.0f + std::erf(v * inv_sqrt2));
    }
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, n]() {
            xn->ensure_grad();
            constexpr float inv_sqrt2pi = 0.39894228040143268f;
            for (std::size_t i = 0; i < n; ++i) {
                float v = xn->value[i];
                float cdf = 0.5f * (1.0f + std::erf(v * 0.70710678118654752f));
                float pdf = inv_sqrt2pi * std::exp(-0.5f * v * v);
                xn->grad[i] += o->grad[i] * (cdf + v * pdf);
            }
        });
    }
    return Tensor(out);
}

Tensor tanh_op(const Tensor& x) {
    auto out = make_node(x.shape());
    const std::size_t n = out->numel();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = std::tanh(x.value()[i]);
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, n]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                xn->grad[i] += o->grad[i] * (1.0f - o->value[i] * o->value[i]);
        });
    }
    return Tensor(out);
}

Tensor softmax_last_dim(const Tensor& x) {
    const int M = x.node().rows(), N = x.node().cols();
    auto out = make_node(x.shape());
    for (int m = 0; m < M; ++m) {
        const float* row = x.value().data() + static_cast<std::size_t>(m) * N;
        float* orow = out->value.data() + static_cast<std::size_t>(m) * N;
        float mx = row[0];
        for (int i = 1; i < N; ++i) mx = std::max(mx, row[i]);
        float sum = 0.0f;
        for (int i = 0; i < N; ++i) {
            orow[i] = std::exp(row[i] - mx);
            sum += orow[i];
        }
        for (int i = 0; i < N; ++i) orow[i] /= sum;
    }
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, M, N]() {
            xn->ensure_grad();
            for (int m = 0; m < M; ++m) {
                const float* y = o->value.data() + static_cast<std::size_t>(m) * N;
                const float* dy = o->grad.data() + static_cast<std::size_t>(m) * N;
                float* dx = xn->grad.data() + static_cast<std::size_t>(m) * N;
                float dot = 0.0f;
                for (int i = 0; i < N; ++i) dot += dy[i] * y[i];
                for (int i = 0; i < N; ++i) dx[i] += y[i] * (dy[i] - dot);
            }
        });
    }
    return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps) {
    const int M = x.node().rows(), N = x.node().cols();
    if (gain.shape() != std::vector<int>{N} || bias.shape() != std::vector<int>{N})
        throw std::invalid_argument("layer_norm: gain/bias must have length " + std::to_string(N));
    auto out = make_node(x.shape());
    // cache x_hat and inv_std for backward
    auto xhat = std::make_shared<std::vector<float>>(static_cast<std::size_t>(M) * N);
    auto inv_std = std::make_shared<std::vector<float>>(M);
    for (int m = 0; m < M; ++m) {
        const float* row = x.value().data() + static_cast<std::size_t>(m) * N;
        float mean = 0.0f;
        for (int i = 0; i < N; ++i) mean += row[i];
        mean /= N;
        float var = 0.0f;
        for (int i = 0; i < N; ++i) var += (row[i] - mean) * (row[i] - mean);
        var /= N;
        float is = 1.0f / std::sqrt(var + eps);
        (*inv_std)[m] = is;
        float* xh = xhat->data() + static_cast<std::size_t>(m) * N;
        float* orow = out->value.data() + static_cast<std::size_t>(m) * N;
        for (int i = 0; i < N; ++i) {
            xh[i] = (row[i] - mean) * is;
            orow[i] = xh[i] * gain.value()[i] + bias.value()[i];
        }
    }
    if (track({&x, &gain, &bias})) {
        Node* o = out.get();
        NodePtr xn = x.ptr(), gn = gain.ptr(), bn = bias.ptr();
        attach(out, {&x, &gain, &bias}, [o, xn, gn, bn, xhat, inv_std, M, N]() {
            for (int m = 0; m < M; ++m) {
                const float* dy = o->grad.data() + static_cast<std::size_t>(m) * N;
                const float* xh = xhat->data() + static_cast<std::size_t>(m) * N;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int i = 0; i < N; ++i) gn->grad[i] += dy[i] * xh[i];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int i = 0; i < N; ++i) bn->grad[i] += dy[i];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    float* dx = xn->grad.data() + static_cast<std::size_t>(m) * N;
                    float mean_gdy = 0.0f, mean_gdy_xh = 0.0f;
                    for (int i = 0; i < N; ++i) {
                        float g = dy[i] * gn->value[i];
                        mean_gdy += g;
                        mean_gdy_xh += g * xh[i];
                    }
                    mean_gdy /= N;
                    mean_gdy_xh /= N;
                    const float is = (*inv_std)[m];
                    for (int i = 0; i < N; ++i) {
                        float g = dy[i] * gn->value[i];
                        dx[i] += (g - mean_gdy - xh[i] * mean_gdy_xh) * is;
                    }
                }
            }
        });
    }
    return Tensor(out);
}

Tensor dropout(const Tensor& x, float p, Rng& rng) {
    if (p <= 0.0f) return x;
    if (p >= 1.0f) throw std::invalid_argument("dropout: p must be < 1");
    auto out = make_node(x.shape());
    const std::size_t n = out->numel();
    auto mask = std::make_shared<std::vector<float>>(n);
    const float keep_scale = 1.0f / (1.0f - p);
    for (std::size_t i = 0; i < n; ++i) {
        (*mask)[i] = rng.uniform() < p ? 0.0f : keep_scale;
        out->value[i] = x.value()[i] * (*mask)[i];
    }
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, mask, n]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += o->grad[i] * (*mask)[i];
        });
    }
    return Tensor(out);
}

Tensor causal_self_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                             float scale, float dropout_p, Rng* rng) {
    check_same_shape(q, k, "causal_self_attention");
    check_same_shape(q, v, "causal_self_attention");
    if (q.shape().size() != 2) throw std::invalid_argument("causal_self_attention: q must be 2-D");
    const int L = q.shape()[0], d = q.shape()[1];
    if (n_heads < 1 || d % n_heads != 0)
        throw std::invalid_argument("causal_self_attention: d must be divisible by n_heads");
    const int dh = d / n_heads;
    const bool use_dropout = dropout_p > 0.0f && grad_enabled();
    if (use_dropout && rng == nullptr)
        throw std::invalid_argument("causal_self_attention: dropout needs an rng");
    if (dropout_p >= 1.0f) throw std::invalid_argument("causal_self_attention: p must be < 1");

    auto out = make_node({L, d});
    // softmax weights over the causal prefix, packed per head:
    // head h, row i starts at offset h * L(L+1)/2 + i(i+1)/2 and has i+1 entries
    const std::size_t tri = static_cast<std::size_t>(L) * (L + 1) / 2;
    auto w_pre = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n_heads) * tri);
    std::shared_ptr<std::vector<float>> keep;  // dropout factors, same packing
    if (use_dropout)
        keep = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n_heads) * tri);
    const float keep_scale = 1.0f / (1.0f - dropout_p);

    const float* qv = q.value().data();
    const float* kv = k.value().data();
    const float* vv = v.value().data();
    for (int h = 0; h < n_heads; ++h) {
        float* wh = w_pre->data() + static_cast<std::size_t>(h) * tri;
        float* kh_keep = keep ? keep->data() + static_cast<std::size_t>(h) * tri : nullptr;
        for (int i = 0; i < L; ++i) {
            const float* qi = qv + static_cast<std::size_t>(i) * d + h * dh;
            float* wi = wh + static_cast<std::size_t>(i) * (i + 1) / 2;
            float mx = -std::numeric_limits<float>::infinity();
            for (int j = 0; j <= i; ++j) {
                const float* kj = kv + static_cast<std::size_t>(j) * d + h * dh;
                float acc = 0.0f;
                for (int c = 0; c < dh; ++c) acc += qi[c] * kj[c];
                wi[j] = acc * scale;
                mx = std::max(mx, wi[j]);
            }
            float sum = 0.0f;
            for (int j = 0; j <= i; ++j) {
                wi[j] = std::exp(wi[j] - mx);
                sum += wi[j];
            }
            for (int j = 0; j <= i; ++j) wi[j] /= sum;

            float* oi = out->value.data() + static_cast<std::size_t>(i) * d + h * dh;
            for (int c = 0; c < dh; ++c) oi[c] = 0.0f;
            if (use_dropout) {
                float* ki = kh_keep + static_cast<std::size_t>(i) * (i + 1) / 2;
                for (int j = 0; j <= i; ++j)
                    ki[j] = rng->uniform() < dropout_p ? 0.0f : keep_scale;
                for (int j = 0; j <= i; ++j) {
                    const float wj = wi[j] * ki[j];
                    const float* vj = vv + static_cast<std::size_t>(j) * d + h * dh;
                    for (int c = 0; c < dh; ++c) oi[c] += wj * vj[c];
                }
            } else {
                for (int j = 0; j <= i; ++j) {
                    const float wj = wi[j];
                    const float* vj = vv + static_cast<std::size_t>(j) * d + h * dh;
                    for (int c = 0; c < dh; ++c) oi[c] += wj * vj[c];
                }
            }
        }
    }

    if (track({&q, &k, &v})) {
        Node* o = out.get();
        NodePtr qn = q.ptr(), kn = k.ptr(), vn = v.ptr();
        attach(out, {&q, &k, &v}, [o, qn, kn, vn, w_pre, keep, L, d, n_heads, dh, scale, tri]() {
            qn->ensure_grad();
            kn->ensure_grad();
            vn->ensure_grad();
            const float* qv = qn->value.data();
            const float* kv = kn->value.data();
            const float* vv = vn->value.data();
            std::vector<float> dw(L);  // gradient w.r.t. pre-dropout weights, one row
            for (int h = 0; h < n_heads; ++h) {
                const float* wh = w_pre->data() + static_cast<std::size_t>(h) * tri;
                const float* kh_keep =
                    keep ? keep->data() + static_cast<std::size_t>(h) * tri : nullptr;
                for (int i = 0; i < L; ++i) {
                    const float* wi = wh + static_cast<std::size_t>(i) * (i + 1) / 2;
                    const float* ki = kh_keep ? kh_keep + static_cast<std::size_t>(i) * (i + 1) / 2
                                              : nullptr;
                    const float* doi = o->grad.data() + static_cast<std::size_t>(i) * d + h * dh;
                    // dV and dW
                    for (int j = 0; j <= i; ++j) {
                        const float* vj = vv + static_cast<std::size_t>(j) * d + h * dh;
                        float* dvj = vn->grad.data() + static_cast<std::size_t>(j) * d + h * dh;
                        float acc = 0.0f;
                        const float w_used = ki ? wi[j] * ki[j] : wi[j];
                        for (int c = 0; c < dh; ++c) {
                            acc += doi[c] * vj[c];
                            dvj[c] += w_used * doi[c];
                        }
                        dw[j] = ki ? acc * ki[j] : acc;  // chain through dropout
                    }
                    // softmax backward: ds_j = w_j (dw_j - sum_k w_k dw_k)
                    float dot = 0.0f;
                    for (int j = 0; j <= i; ++j) dot += wi[j] * dw[j];
                    const float* qi = qv + static_cast<std::size_t>(i) * d + h * dh;
                    float* dqi = qn->grad.data() + static_cast<std::size_t>(i) * d + h * dh;
                    for (int j = 0; j <= i; ++j) {
                        const float ds = wi[j] * (dw[j] - dot) * scale;
                        const float* kj = kv + static_cast<std::size_t>(j) * d + h * dh;
                        float* dkj = kn->grad.data() + static_cast<std::size_t>(j) * d + h * dh;
                        for (int c = 0; c < dh; ++c) {
                            dqi[c] += ds * kj[c];
                            dkj[c] += ds * qi[c];
                        }
                    }
                }
            }
        });
    }
    return Tensor(out);
}

Tensor mean_all(const Tensor& x) {
    auto out = make_node({1});
    const std::size_t n = x.node().numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x.value()[i];
    out->value[0] = static_cast<float>(acc / static_cast<double>(n));
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, n]() {
            xn->ensure_grad();
            const float g = o->grad[0] / static_cast<float>(n);
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += g;
        });
    }
    return Tensor(out);
}

Tensor sum_all(const Tensor& x) {
    auto out = make_node({1});
    const std::size_t n = x.node().numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x.value()[i];
    out->value[0] = static_cast<float>(acc);
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, n]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += o->grad[0];
        });
    }
    return Tensor(out);
}

Tensor transpose(const Tensor& x) {
    const int M = x.node().rows(), N = x.node().cols();
    auto out = make_node({N, M});
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
            out->value[static_cast<std::size_t>(n) * M + m] =
                x.value()[static_cast<std::size_t>(m) * N + n];
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, M, N]() {
            xn->ensure_grad();
            for (int m = 0; m < M; ++m)
                for (int n = 0; n < N; ++n)
                    xn->grad[static_cast<std::size_t>(m) * N + n] +=
                        o->grad[static_cast<std::size_t>(n) * M + m];
        });
    }
    return Tensor(out);
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    const int M = x.node().rows(), N = x.node().cols();
    if (start < 0 || start + len > N) throw std::invalid_argument("slice_cols: out of range");
    auto out = make_node({M, len});
    for (int m = 0; m < M; ++m)
        std::copy_n(x.value().data() + static_cast<std::size_t>(m) * N + start, len,
                    out->value.data() + static_cast<std::size_t>(m) * len);
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        attach(out, {&x}, [o, xn, M, N, start, len]() {
            xn->ensure_grad();
            for (int m = 0; m < M; ++m)
                for (int i = 0; i < len; ++i)
                    xn->grad[static_cast<std::size_t>(m) * N + start + i] +=
                        o->grad[static_cast<std::size_t>(m) * len + i];
        });
    }
    return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int M = xs[0].node().rows();
    int N = 0;
    for (const auto& x : xs) {
        if (x.node().rows() != M) throw std::invalid_argument("concat_cols: row count mismatch");
        N += x.node().cols();
    }
    auto out = make_node({M, N});
    int off = 0;
    for (const auto& x : xs) {
        const int c = x.node().cols();
        for (int m = 0; m < M; ++m)
            std::copy_n(x.value().data() + static_cast<std::size_t>(m) * c, c,
                        out->value.data() + static_cast<std::size_t>(m) * N + off);
        off += c;
    }
    bool any = false;
    if (g_no_grad_depth == 0)
        for (const auto& x : xs)
            if (x.node().requires_grad) any = true;
    if (any) {
        Node* o = out.get();
        std::vector<NodePtr> parents;
        for (const auto& x : xs) parents.push_back(x.ptr());
        out->requires_grad = true;
        out->parents = parents;
        out->backward_fn = [o, parents, M, N]() {
            int off2 = 0;
            for (const auto& p : parents) {
                const int c = p->cols();
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (int m = 0; m < M; ++m)
                        for (int i = 0; i < c; ++i)
                            p->grad[static_cast<std::size_t>(m) * c + i] +=
                                o->grad[static_cast<std::size_t>(m) * N + off2 + i];
                }
                off2 += c;
            }
        };
    }
    return Tensor(out);
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
    const int M = x.node().rows(), N = x.node().cols();
    auto out = make_node({static_cast<int>(indices.size()), N});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= M)
            throw std::invalid_argument("gather_rows: index out of range");
        std::copy_n(x.value().data() + static_cast<std::size_t>(indices[i]) * N, N,
                    out->value.data() + i * N);
    }
    if (track({&x})) {
        Node* o = out.get();
        NodePtr xn = x.ptr();
        auto idx = std::make_shared<std::vector<int>>(indices);
        attach(out, {&x}, [o, xn, idx, N]() {
            xn->ensure_grad();
            for (std::size_t i = 0; i < idx->size(); ++i)
                for (int c = 0; c < N; ++c)
                    xn->grad[static_cast<std::size_t>((*idx)[i]) * N + c] +=
                        o->grad[i * N + c];
        });
    }
    return Tensor(out);
}

Tensor assemble_rows(const std::vector<Tensor>& sources,
                     const std::vector<std::pair<int, int>>& pattern) {
    if (sources.empty()) throw std::invalid_argument("assemble_rows: no sources");
    const int N = sources[0].node().cols();
    for (const auto& s : sources)
        if (s.node().cols() != N) throw std::invalid_argument("assemble_rows: column mismatch");
    auto out = make_node({static_cast<int>(pattern.size()), N});
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        auto [src, row] = pattern[i];
        const Node& s = sources.at(src).node();
        if (row < 0 || row >= s.rows()) throw std::invalid_argument("assemble_rows: row out of range");
        std::copy_n(s.value.data() + static_cast<std::size_t>(row) * N, N,
                    out->value.data() + i * N);
    }
    bool any = false;
    if (g_no_grad_depth == 0)
        for (const auto& s : sources)
            if (s.node().requires_grad) any = true;
    if (any) {
        Node* o = out.get();
        std::vector<NodePtr> parents;
        for (const auto& s : sources) parents.push_back(s.ptr());
        auto pat = std::make_shared<std::vector<std::pair<int, int>>>(pattern);
        out->requires_grad = true;
        out->parents = parents;
        out->backward_fn = [o, parents, pat, N]() {
            for (std::size_t i = 0; i < pat->size(); ++i) {
                auto [src, row] = (*pat)[i];
                Node& s = *parents[src];
                if (!s.requires_grad) continue;
                s.ensure_grad();
                for (int c = 0; c < N; ++c)
                    s.grad[static_cast<std::size_t>(row) * N + c] += o->grad[i * N + c];
            }
        };
    }
    return Tensor(out);
}

Tensor mse_loss(const Tensor& pred, const std::vector<float>& target) {
    const std::size_t n = pred.node().numel();
    if (target.size() != n) throw std::invalid_argument("mse_loss: target size mismatch");
    auto out = make_node({1});
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(pred.value()[i]) - target[i];
        acc += d * d;
    }
    out->value[0] = static_cast<float>(acc / static_cast<double>(n));
    if (track({&pred})) {
        Node* o = out.get();
        NodePtr pn = pred.ptr();
        auto tgt = std::make_shared<std::vector<float>>(target);
        attach(out, {&pred}, [o, pn, tgt, n]() {
            pn->ensure_grad();
            const float g = 2.0f * o->grad[0] / static_cast<float>(n);
            for (std::size_t i = 0; i < n; ++i)
                pn->grad[i] += g * (pn->value[i] - (*tgt)[i]);
        });
    }
    return Tensor(out);
}

void backward(const Tensor& loss) {
    if (loss.node().numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar");
    // topological order, leaves first
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.ptr().get(), 0);
    visited.insert(loss.ptr().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.ptr()->ensure_grad();
    loss.ptr()->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn();
        }
    }
}

}  // namespace qdlab::nn
