#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qdlab {

using BehaviorDescriptor = std::vector<double>;

/// Bounded box in behavior-descriptor space.
struct BdSpace {
    int dim = 0;
    std::vector<double> lower;
    std::vector<double> upper;

    BdSpace() = default;
    BdSpace(std::vector<double> lo, std::vector<double> hi);

    double diagonal() const;
};

/// Fixed tessellation of a BdSpace. Centroids are sorted lexicographically
/// so cell indices are stable across runs.
struct Centroids {
    int dim = 0;
    int n_cells = 0;
    std::uint64_t seed = 0;
    std::vector<double> points;  // row-major [n_cells x dim]

    const double* cell(int i) const { return points.data() + static_cast<std::size_t>(i) * dim; }
};

struct CvtParams {
    int n_samples = 0;  // default chosen as max(10*n_cells, 10000) when 0
    int max_iters = 100;
};

// Lloyd's k-means (k-means++ init) over uniform samples in the box.
// Deterministic per (space, n_cells, params, seed); bit-identical output.
Centroids build_cvt(const BdSpace& space, int n_cells, std::uint64_t seed, CvtParams params = {});

// Index of the nearest centroid by Euclidean distance, ties to lowest index.
int nearest_cell(const Centroids& c, const BehaviorDescriptor& bd);

double euclidean(const BehaviorDescriptor& a, const BehaviorDescriptor& b);

// Mean pairwise Euclidean distance over all unordered pairs.
// Throws std::invalid_argument for fewer than two descriptors.
double spread(const std::vector<BehaviorDescriptor>& bds);

// Weiszfeld iteration from the component-wise mean. If an iterate lands
// within 1e-12 of a data point, that point is returned.
BehaviorDescriptor geometric_median(const std::vector<BehaviorDescriptor>& bds,
                                    double tol = 1e-10, int max_iters = 1000);

// JSON serialization: {dim, n_cells, seed, points}
std::string centroids_to_json(const Centroids& c);
Centroids centroids_from_json(const std::string& json_text);
void save_centroids(const Centroids& c, const std::string& path);
Centroids load_centroids(const std::string& path);

}  // namespace qdlab
