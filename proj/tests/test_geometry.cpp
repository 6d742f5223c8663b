#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "qdlab/geometry.hpp"
#include "qdlab/rng.hpp"

using namespace qdlab;

namespace {

// Brute-force oracle: literal double loop over unordered pairs.
double spread_oracle(const std::vector<BehaviorDescriptor>& bds) {
    const std::size_t k = bds.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < bds[i].size(); ++c)
                d2 += (bds[i][c] - bds[j][c]) * (bds[i][c] - bds[j][c]);
            sum += std::sqrt(d2);
        }
    return 2.0 * sum / (static_cast<double>(k) * (k - 1));
}

double median_objective(const BehaviorDescriptor& p, const std::vector<BehaviorDescriptor>& bds) {
    double s = 0.0;
    for (const auto& b : bds) s += euclidean(p, b);
    return s;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("spread hand cases") {
    CHECK(spread({{1.0, 2.0}, {1.0, 2.0}}) == 0.0);
    CHECK(spread({{0.0, 0.0}, {3.0, 4.0}}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(spread({{0.0, 0.0}, {3.0, 4.0}, {0.0, 0.0}}) ==
          doctest::Approx(10.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(spread({{1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(spread({}), std::invalid_argument);
}

TEST_CASE("spread equals brute-force pairwise mean") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(63));
        const int dim = 1 + static_cast<int>(rng.below(4));
        std::vector<BehaviorDescriptor> bds(k, BehaviorDescriptor(dim));
        for (auto& b : bds)
            for (auto& v : b) v = rng.uniform(-100.0, 100.0);
        CHECK(std::abs(spread(bds) - spread_oracle(bds)) < 1e-12);
    }
}

TEST_CASE("euclidean") {
    CHECK(euclidean({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(5.0));
    CHECK(euclidean({1.5}, {1.5}) == 0.0);
}

TEST_CASE("nearest_cell matches brute force and breaks ties low") {
    BdSpace space({0.0, 0.0}, {1.0, 1.0});
    Centroids c = build_cvt(space, 16, 5);
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        BehaviorDescriptor bd{rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
        int best = 0;
        double best_d = euclidean(bd, {c.cell(0)[0], c.cell(0)[1]});
        for (int i = 1; i < c.n_cells; ++i) {
            double d = euclidean(bd, {c.cell(i)[0], c.cell(i)[1]});
            if (d < best_d) {
                best = i;
                best_d = d;
            }
        }
        CHECK(nearest_cell(c, bd) == best);
    }

    Centroids dup;
    dup.dim = 2;
    dup.n_cells = 3;
    dup.points = {0.5, 0.5, 0.5, 0.5, 0.9, 0.9};  // cells 0 and 1 coincide
    CHECK(nearest_cell(dup, {0.45, 0.55}) == 0);
}

TEST_CASE("cvt centroids are deterministic, sorted, inside the box") {
    BdSpace space({-15.0, -15.0}, {15.0, 15.0});
    Centroids a = build_cvt(space, 64, 42);
    Centroids b = build_cvt(space, 64, 42);
    CHECK(a.points == b.points);  // bit-identical
    Centroids other = build_cvt(space, 64, 43);
    CHECK(a.points != other.points);

    for (int i = 0; i < a.n_cells; ++i) {
        CHECK(a.cell(i)[0] >= -15.0);
        CHECK(a.cell(i)[0] <= 15.0);
        CHECK(a.cell(i)[1] >= -15.0);
        CHECK(a.cell(i)[1] <= 15.0);
        if (i > 0) {
            const double* p = a.cell(i - 1);
            const double* q = a.cell(i);
            CHECK((p[0] < q[0] || (p[0] == q[0] && p[1] <= q[1])));
        }
    }
}

TEST_CASE("cvt with one cell sits at the sample mean") {
    BdSpace space({0.0, 0.0}, {2.0, 4.0});
    Centroids c = build_cvt(space, 1, 9);
    // uniform samples in the box: the single cluster converges to the mean
    CHECK(c.cell(0)[0] == doctest::Approx(1.0).epsilon(0.05));
    CHECK(c.cell(0)[1] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("cvt is a local optimum of quantization error") {
    // k-means oracle property: each centroid is close to the mean of the
    // uniform points it wins; check via fresh Monte-Carlo samples.
    BdSpace space({0.0, 0.0}, {1.0, 1.0});
    Centroids c = build_cvt(space, 8, 3);
    std::vector<BehaviorDescriptor> sums(8, {0.0, 0.0});
    std::vector<int> counts(8, 0);
    Rng rng(17);
    for (int i = 0; i < 200000; ++i) {
        BehaviorDescriptor p{rng.uniform(), rng.uniform()};
        int cell = nearest_cell(c, p);
        sums[cell][0] += p[0];
        sums[cell][1] += p[1];
        counts[cell]++;
    }
    for (int i = 0; i < 8; ++i) {
        REQUIRE(counts[i] > 0);
        CHECK(std::abs(sums[i][0] / counts[i] - c.cell(i)[0]) < 0.05);
        CHECK(std::abs(sums[i][1] / counts[i] - c.cell(i)[1]) < 0.05);
    }
}

TEST_CASE("geometric median hand cases") {
    // middle of three collinear points
    auto m = geometric_median({{0.0, 0.0}, {1.0, 0.0}, {10.0, 0.0}});
    CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(m[1]) < 1e-9);
    // majority weight at a data point
    auto m2 = geometric_median({{0.0, 0.0}, {0.0, 0.0}, {5.0, 0.0}});
    CHECK(m2[0] == doctest::Approx(0.0).epsilon(1e-9));
    // square corners -> center
    auto m3 = geometric_median({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
    CHECK(m3[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(m3[1] == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("geometric median beats a grid search") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<BehaviorDescriptor> bds(5, BehaviorDescriptor(2));
        for (auto& b : bds)
            for (auto& v : b) v = rng.uniform(0.0, 1.0);
        auto med = geometric_median(bds);
        const double fmed = median_objective(med, bds);
        for (int gx = 0; gx <= 40; ++gx)
            for (int gy = 0; gy <= 40; ++gy) {
                BehaviorDescriptor p{gx / 40.0, gy / 40.0};
                CHECK(fmed <= median_objective(p, bds) + 1e-6);
            }
    }
}

TEST_CASE("centroids JSON round trip") {
    BdSpace space({0.0, 0.0}, {1.0, 1.0});
    Centroids c = build_cvt(space, 16, 11);
    Centroids back = centroids_from_json(centroids_to_json(c));
    CHECK(back.dim == c.dim);
    CHECK(back.n_cells == c.n_cells);
    CHECK(back.seed == c.seed);
    CHECK(back.points == c.points);  // full double round trip

    auto tmp = std::filesystem::temp_directory_path() / "qdlab_test_centroids.json";
    save_centroids(c, tmp.string());
    Centroids from_file = load_centroids(tmp.string());
    CHECK(from_file.points == c.points);
    std::filesystem::remove(tmp);
}

TEST_CASE("bd space validation") {
    CHECK_THROWS_AS(BdSpace({0.0}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(BdSpace({0.0, 0.0}, {1.0}), std::invalid_argument);
    BdSpace s({0.0, 0.0}, {3.0, 4.0});
    CHECK(s.diagonal() == doctest::Approx(5.0));
}

}  // TEST_SUITE
