// Compares the serial reference gemm against the OpenMP kernel and checks
// they agree bit-for-bit (the parallel kernel splits work only across
// disjoint output rows, so any thread count must reproduce the serial
// result exactly).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include <omp.h>

#include "qdlab/nn/kernels.hpp"
#include "qdlab/rng.hpp"

using namespace qdlab;

namespace {

template <typename F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main() {
    std::printf("threads available: %d\n", omp_get_max_threads());
    std::printf("%6s %6s %6s | %10s %10s %8s | %s\n", "M", "N", "K", "serial(ms)", "omp(ms)",
                "speedup", "bitwise");

    Rng rng(12345);
    for (int n : {64, 128, 256, 512, 1024}) {
        const int M = n, N = n, K = n;
        std::vector<float> a(static_cast<std::size_t>(M) * K), b(static_cast<std::size_t>(K) * N);
        for (auto& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (auto& v : b) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        std::vector<float> c_serial(static_cast<std::size_t>(M) * N);
        std::vector<float> c_omp(static_cast<std::size_t>(M) * N);

        const int reps = n <= 256 ? 20 : 5;
        double ts = best_of(reps, [&] {
            nn::gemm_serial(M, N, K, a.data(), K, false, b.data(), N, false, c_serial.data(), N,
                            false);
        });
        double tp = best_of(reps, [&] {
            nn::gemm(M, N, K, a.data(), K, false, b.data(), N, false, c_omp.data(), N, false);
        });
        const bool same =
            std::memcmp(c_serial.data(), c_omp.data(), c_serial.size() * sizeof(float)) == 0;
        std::printf("%6d %6d %6d | %10.3f %10.3f %8.2f | %s\n", M, N, K, ts * 1e3, tp * 1e3,
                    ts / tp, same ? "identical" : "MISMATCH");
        if (!same) return 1;
    }

    // The shape the transformer actually runs: [tokens x emb] x [emb x emb].
    for (int tokens : {301}) {
        const int M = tokens, N = 64, K = 64;
        std::vector<float> a(static_cast<std::size_t>(M) * K), b(static_cast<std::size_t>(K) * N);
        for (auto& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (auto& v : b) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        std::vector<float> c(static_cast<std::size_t>(M) * N);
        double ts = best_of(200, [&] {
            nn::gemm_serial(M, N, K, a.data(), K, false, b.data(), N, false, c.data(), N, false);
        });
        const double gflops = 2.0 * M * N * K / ts / 1e9;
        std::printf("token-shaped %dx%dx%d: %.3f ms (%.1f GFLOP/s)\n", M, N, K, ts * 1e3, gflops);
    }
    return 0;
}
