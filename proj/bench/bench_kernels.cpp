// Times the blocked/OpenMP kernels against their serial references on the
// matrix shapes the corrector model hits during training.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include <omp.h>

#include "ocrfix/kernels.hpp"

namespace {

using GemmFn = void (*)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);

double seconds_per_call(const std::function<void()>& fn, double min_seconds = 0.2) {
    using clock = std::chrono::steady_clock;
    fn();
    std::size_t reps = 0;
    const auto start = clock::now();
    double elapsed = 0.0;
    do {
        fn();
        ++reps;
        elapsed = std::chrono::duration<double>(clock::now() - start).count();
    } while (elapsed < min_seconds);
    return elapsed / static_cast<double>(reps);
}

void bench_gemm(const char* name, GemmFn fast, GemmFn ref, std::size_t m, std::size_t k, std::size_t n) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> a(m * k), b(k * n), c(m * n, 0.0);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const double flops = 2.0 * static_cast<double>(m * k * n);
    const double t_fast = seconds_per_call([&] { fast(a.data(), b.data(), c.data(), m, k, n, false); });
    const double t_ref = seconds_per_call([&] { ref(a.data(), b.data(), c.data(), m, k, n, false); });
    std::printf("%-8s m=%-5zu k=%-5zu n=%-5zu  blocked %8.2f GFLOP/s   reference %8.2f GFLOP/s   speedup %6.1fx\n",
                name, m, k, n, flops / t_fast * 1e-9, flops / t_ref * 1e-9, t_ref / t_fast);
}

}  // namespace

int main() {
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
    const std::size_t shapes[][3] = {{32, 384, 1024}, {32, 1152, 1024}, {1280, 128, 1024},
                                     {1280, 1024, 80}, {2, 384, 1024}, {256, 256, 256}};
    for (const auto& s : shapes) {
        bench_gemm("nn", ocrfix::kernels::gemm_nn, ocrfix::kernels::gemm_nn_reference, s[0], s[1], s[2]);
        bench_gemm("tn", ocrfix::kernels::gemm_tn, ocrfix::kernels::gemm_tn_reference, s[0], s[1], s[2]);
        bench_gemm("nt", ocrfix::kernels::gemm_nt, ocrfix::kernels::gemm_nt_reference, s[0], s[1], s[2]);
    }

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const std::size_t rows = 1280, cols = 96;
    std::vector<double> x(rows * cols), y(rows * cols);
    for (auto& v : x) v = u(rng);
    const double t_fast = seconds_per_call([&] { ocrfix::kernels::row_softmax(x.data(), y.data(), rows, cols); });
    const double t_ref = seconds_per_call([&] { ocrfix::kernels::row_softmax_reference(x.data(), y.data(), rows, cols); });
    std::printf("softmax  rows=%zu cols=%zu  blocked %.1f us   reference %.1f us\n", rows, cols, t_fast * 1e6, t_ref * 1e6);
    return 0;
}
