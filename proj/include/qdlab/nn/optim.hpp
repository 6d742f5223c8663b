#pragma once

#include <vector>

#include "qdlab/nn/tensor.hpp"

namespace qdlab::nn {

struct AdamConfig {
    float lr = 7e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config = {});

    void zero_grad();
    void step();
    long step_count() const { return t_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<std::vector<float>> m_, v_;
    long t_ = 0;
};

// Scales all gradients so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace qdlab::nn
