#include "qdlab/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "qdlab/rng.hpp"

namespace qdlab {

int MlpArch::n_params() const {
    int total = 0;
    int in = obs_dim;
    for (int h : hidden) {
        total += in * h + h;
        in = h;
    }
    total += in * act_dim + act_dim;
    return total;
}

Genotype init_random(const MlpArch& arch, std::uint64_t seed) {
    Rng rng(seed);
    Genotype g;
    g.arch = arch;
    g.params.resize(arch.n_params());
    std::size_t p = 0;
    int in = arch.obs_dim;
    std::vector<int> outs = arch.hidden;
    outs.push_back(arch.act_dim);
    for (int out : outs) {
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (int i = 0; i < in * out; ++i) g.params[p++] = static_cast<float>(rng.uniform(-bound, bound));
        for (int i = 0; i < out; ++i) g.params[p++] = 0.0f;  // biases
        in = out;
    }
    return g;
}

std::vector<double> forward(const Genotype& g, const std::vector<double>& obs) {
    if (static_cast<int>(obs.size()) != g.arch.obs_dim)
        throw std::invalid_argument("policy forward: observation dimension mismatch");
    if (static_cast<int>(g.params.size()) != g.arch.n_params())
        throw std::invalid_argument("policy forward: parameter count does not match architecture");

    std::vector<double> x = obs;
    std::size_t p = 0;
    std::vector<int> outs = g.arch.hidden;
    outs.push_back(g.arch.act_dim);
    for (int out : outs) {
        const int in = static_cast<int>(x.size());
        std::vector<double> y(out);
        // weights stored row-major [out x in], then biases
        for (int o = 0; o < out; ++o) {
            double acc = 0.0;
            const float* w = g.params.data() + p + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += static_cast<double>(w[i]) * x[i];
            y[o] = acc;
        }
        p += static_cast<std::size_t>(out) * in;
        for (int o = 0; o < out; ++o) y[o] = std::tanh(y[o] + static_cast<double>(g.params[p + o]));
        p += out;
        x = std::move(y);
    }
    return x;
}

Genotype isoline_variation(const Genotype& p1, const Genotype& p2, double iso_sigma,
                           double line_sigma, std::uint64_t seed) {
    if (!(p1.arch == p2.arch)) throw std::invalid_argument("isoline_variation: architecture mismatch");
    Rng rng(seed);
    const double lambda = rng.normal();
    Genotype child;
    child.arch = p1.arch;
    child.params.resize(p1.params.size());
    for (std::size_t i = 0; i < p1.params.size(); ++i) {
        double v = static_cast<double>(p1.params[i]) + iso_sigma * rng.normal() +
                   line_sigma * lambda * (static_cast<double>(p2.params[i]) - static_cast<double>(p1.params[i]));
        child.params[i] = static_cast<float>(v);
    }
    return child;
}

}  // namespace qdlab
