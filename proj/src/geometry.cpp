#include "qdlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qdlab/rng.hpp"

namespace qdlab {

BdSpace::BdSpace(std::vector<double> lo, std::vector<double> hi)
    : dim(static_cast<int>(lo.size())), lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.empty() || lower.size() > 8)
        throw std::invalid_argument("BdSpace: dim must be in 1..8");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i]))
            throw std::invalid_argument("BdSpace: lower must be < upper on every axis");
}

double BdSpace::diagonal() const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += (upper[i] - lower[i]) * (upper[i] - lower[i]);
    return std::sqrt(s);
}

namespace {

double sqdist(const double* a, const double* b, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

Centroids build_cvt(const BdSpace& space, int n_cells, std::uint64_t seed, CvtParams params) {
    if (n_cells < 1) throw std::invalid_argument("build_cvt: n_cells must be >= 1");
    int n_samples = params.n_samples > 0 ? params.n_samples : std::max(10 * n_cells, 10000);
    if (n_cells > n_samples) throw std::invalid_argument("build_cvt: n_cells exceeds n_samples");

    const int dim = space.dim;
    Rng rng(seed);

    std::vector<double> samples(static_cast<std::size_t>(n_samples) * dim);
    for (int i = 0; i < n_samples; ++i)
        for (int d = 0; d < dim; ++d)
            samples[static_cast<std::size_t>(i) * dim + d] = rng.uniform(space.lower[d], space.upper[d]);

    auto sample = [&](int i) { return samples.data() + static_cast<std::size_t>(i) * dim; };

    // k-means++ initialization
    std::vector<double> centers(static_cast<std::size_t>(n_cells) * dim);
    std::vector<double> min_d2(n_samples, std::numeric_limits<double>::max());
    {
        int first = static_cast<int>(rng.below(n_samples));
        std::copy_n(sample(first), dim, centers.begin());
        for (int k = 1; k < n_cells; ++k) {
            const double* prev = centers.data() + static_cast<std::size_t>(k - 1) * dim;
            double total = 0.0;
            for (int i = 0; i < n_samples; ++i) {
                min_d2[i] = std::min(min_d2[i], sqdist(sample(i), prev, dim));
                total += min_d2[i];
            }
            double target = rng.uniform() * total;
            int chosen = n_samples - 1;
            double acc = 0.0;
            for (int i = 0; i < n_samples; ++i) {
                acc += min_d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
            std::copy_n(sample(chosen), dim, centers.begin() + static_cast<std::size_t>(k) * dim);
        }
    }

    std::vector<int> assign(n_samples, 0);
    std::vector<double> sums(static_cast<std::size_t>(n_cells) * dim);
    std::vector<int> counts(n_cells);
    const double converge_eps = 1e-5 * space.diagonal();

    for (int iter = 0; iter < params.max_iters; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n_samples; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (int k = 0; k < n_cells; ++k) {
                double d = sqdist(sample(i), centers.data() + static_cast<std::size_t>(k) * dim, dim);
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            assign[i] = best;
            counts[best]++;
            for (int d = 0; d < dim; ++d) sums[static_cast<std::size_t>(best) * dim + d] += sample(i)[d];
        }
        // empty-cluster repair: reseed at the sample farthest from its centroid
        for (int k = 0; k < n_cells; ++k) {
            if (counts[k] > 0) continue;
            int far = 0;
            double far_d = -1.0;
            for (int i = 0; i < n_samples; ++i) {
                double d = sqdist(sample(i), centers.data() + static_cast<std::size_t>(assign[i]) * dim, dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            int old = assign[far];
            counts[old]--;
            for (int d = 0; d < dim; ++d) sums[static_cast<std::size_t>(old) * dim + d] -= sample(far)[d];
            assign[far] = k;
            counts[k] = 1;
            for (int d = 0; d < dim; ++d) sums[static_cast<std::size_t>(k) * dim + d] = sample(far)[d];
        }
        double max_move = 0.0;
        for (int k = 0; k < n_cells; ++k) {
            double* c = centers.data() + static_cast<std::size_t>(k) * dim;
            for (int d = 0; d < dim; ++d) {
                double nc = sums[static_cast<std::size_t>(k) * dim + d] / counts[k];
                max_move = std::max(max_move, std::abs(nc - c[d]));
                c[d] = nc;
            }
        }
        if (max_move < converge_eps) break;
    }

    // lexicographic sort for stable cell identity
    std::vector<int> order(n_cells);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double* pa = centers.data() + static_cast<std::size_t>(a) * dim;
        const double* pb = centers.data() + static_cast<std::size_t>(b) * dim;
        return std::lexicographical_compare(pa, pa + dim, pb, pb + dim);
    });

    Centroids out;
    out.dim = dim;
    out.n_cells = n_cells;
    out.seed = seed;
    out.points.resize(static_cast<std::size_t>(n_cells) * dim);
    for (int k = 0; k < n_cells; ++k)
        std::copy_n(centers.data() + static_cast<std::size_t>(order[k]) * dim, dim,
                    out.points.begin() + static_cast<std::size_t>(k) * dim);
    return out;
}

int nearest_cell(const Centroids& c, const BehaviorDescriptor& bd) {
    if (static_cast<int>(bd.size()) != c.dim)
        throw std::invalid_argument("nearest_cell: descriptor dimension mismatch");
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (int k = 0; k < c.n_cells; ++k) {
        double d = sqdist(bd.data(), c.cell(k), c.dim);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

double euclidean(const BehaviorDescriptor& a, const BehaviorDescriptor& b) {
    if (a.size() != b.size()) throw std::invalid_argument("euclidean: dimension mismatch");
    return std::sqrt(sqdist(a.data(), b.data(), static_cast<int>(a.size())));
}

double spread(const std::vector<BehaviorDescriptor>& bds) {
    const std::size_t k = bds.size();
    if (k < 2) throw std::invalid_argument("spread: needs at least two descriptors");
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) sum += euclidean(bds[i], bds[j]);
    return 2.0 * sum / (static_cast<double>(k) * static_cast<double>(k - 1));
}

BehaviorDescriptor geometric_median(const std::vector<BehaviorDescriptor>& bds, double tol,
                                    int max_iters) {
    if (bds.empty()) throw std::invalid_argument("geometric_median: empty input");
    const int dim = static_cast<int>(bds[0].size());
    if (bds.size() == 1) return bds[0];

    BehaviorDescriptor m(dim, 0.0);
    for (const auto& b : bds)
        for (int d = 0; d < dim; ++d) m[d] += b[d];
    for (int d = 0; d < dim; ++d) m[d] /= static_cast<double>(bds.size());

    for (int iter = 0; iter < max_iters; ++iter) {
        BehaviorDescriptor num(dim, 0.0);
        double denom = 0.0;
        for (const auto& b : bds) {
            double d = euclidean(m, b);
            if (d < 1e-12) return b;
            double w = 1.0 / d;
            denom += w;
            for (int k = 0; k < dim; ++k) num[k] += w * b[k];
        }
        double step = 0.0;
        for (int k = 0; k < dim; ++k) {
            double nk = num[k] / denom;
            step += (nk - m[k]) * (nk - m[k]);
            m[k] = nk;
        }
        if (std::sqrt(step) < tol) break;
    }
    return m;
}

std::string centroids_to_json(const Centroids& c) {
    nlohmann::json j;
    j["dim"] = c.dim;
    j["n_cells"] = c.n_cells;
    j["seed"] = c.seed;
    j["points"] = c.points;
    return j.dump();
}

Centroids centroids_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    Centroids c;
    c.dim = j.at("dim").get<int>();
    c.n_cells = j.at("n_cells").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.points = j.at("points").get<std::vector<double>>();
    if (c.points.size() != static_cast<std::size_t>(c.dim) * c.n_cells)
        throw std::runtime_error("centroids_from_json: points size does not match dim * n_cells");
    return c;
}

void save_centroids(const Centroids& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << centroids_to_json(c);
}

Centroids load_centroids(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open centroid file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return centroids_from_json(ss.str());
}

}  // namespace qdlab
