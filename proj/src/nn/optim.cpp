#include "qdlab/nn/optim.hpp"

#include <cmath>

namespace qdlab::nn {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), cfg_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
        m_.emplace_back(p.node().numel(), 0.0f);
        v_.emplace_back(p.node().numel(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) {
        p.node().ensure_grad();
        std::fill(p.grad().begin(), p.grad().end(), 0.0f);
    }
}

void Adam::step() {
    ++t_;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Node& p = params_[i].node();
        p.ensure_grad();
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const float g = p.grad[j];
            m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0f - cfg_.beta1) * g;
            v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0f - cfg_.beta2) * g * g;
            const float mhat = m_[i][j] / bc1;
            const float vhat = v_[i][j] / bc2;
            p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (float g : p.node().grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float s = static_cast<float>(max_norm / norm);
        for (const auto& p : params) {
            Tensor handle = p;  // shares the node
            for (float& g : handle.grad()) g *= s;
        }
    }
    return norm;
}

}  // namespace qdlab::nn
