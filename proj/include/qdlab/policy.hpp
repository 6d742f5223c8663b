#pragma once

#include <cstdint>
#include <vector>

namespace qdlab {

struct MlpArch {
    int obs_dim = 0;
    std::vector<int> hidden;
    int act_dim = 0;

    int n_params() const;
    bool operator==(const MlpArch&) const = default;
};

/// Flat parameter vector of a tanh MLP policy. Stored as f32 so the
/// on-disk encoding is the in-memory encoding.
struct Genotype {
    MlpArch arch;
    std::vector<float> params;
};

Genotype init_random(const MlpArch& arch, std::uint64_t seed);

// tanh on hidden layers and output; every action component lies in (-1, 1)
std::vector<double> forward(const Genotype& g, const std::vector<double>& obs);

// child = p1 + iso_sigma * eps + line_sigma * lambda * (p2 - p1)
Genotype isoline_variation(const Genotype& p1, const Genotype& p2, double iso_sigma,
                           double line_sigma, std::uint64_t seed);

}  // namespace qdlab
