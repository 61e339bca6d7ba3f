#include <doctest.h>

#include <omp.h>

#include <random>
#include <vector>

#include "ocrfix/kernels.hpp"

using namespace ocrfix;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

using Gemm = void (*)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);

void compare(Gemm fast, Gemm ref, std::size_t a_size, std::size_t b_size, std::size_t m, std::size_t k, std::size_t n,
             std::mt19937_64& rng) {
    const auto a = random_vec(a_size, rng), b = random_vec(b_size, rng), c0 = random_vec(m * n, rng);
    for (bool acc : {false, true}) {
        auto c1 = c0, c2 = c0;
        fast(a.data(), b.data(), c1.data(), m, k, n, acc);
        ref(a.data(), b.data(), c2.data(), m, k, n, acc);
        INFO("m=" << m << " k=" << k << " n=" << n << " acc=" << acc);
        CHECK(max_diff(c1, c2) <= 1e-12 * static_cast<double>(k + 1));
    }
}

}  // namespace

TEST_CASE("gemm kernels agree with the serial reference") {
    std::mt19937_64 rng(1);
    const std::size_t dims[][3] = {{1, 1, 1},   {3, 5, 7},    {7, 16, 33}, {8, 8, 16},  {9, 13, 17},
                                   {32, 64, 48}, {31, 65, 129}, {96, 40, 20}, {2, 300, 5}, {70, 3, 70}};
    for (const auto& d : dims) {
        const auto m = d[0], k = d[1], n = d[2];
        compare(kernels::gemm_nn, kernels::gemm_nn_reference, m * k, k * n, m, k, n, rng);
        compare(kernels::gemm_tn, kernels::gemm_tn_reference, k * m, k * n, m, k, n, rng);
        compare(kernels::gemm_nt, kernels::gemm_nt_reference, m * k, n * k, m, k, n, rng);
    }
}

TEST_CASE("gemm results do not depend on the thread count") {
    std::mt19937_64 rng(2);
    const std::size_t m = 130, k = 70, n = 90;
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
    const int saved = omp_get_max_threads();
    for (Gemm g : {kernels::gemm_nn, kernels::gemm_tn, kernels::gemm_nt}) {
        std::vector<double> one(m * n), many(m * n);
        omp_set_num_threads(1);
        g(a.data(), b.data(), one.data(), m, k, n, false);
        omp_set_num_threads(4);
        g(a.data(), b.data(), many.data(), m, k, n, false);
        CHECK(one == many);
    }
    omp_set_num_threads(saved);
}

TEST_CASE("row softmax kernel") {
    std::mt19937_64 rng(3);
    const std::size_t rows = 17, cols = 23;
    auto x = random_vec(rows * cols, rng);
    for (auto& v : x) v *= 30.0;
    std::vector<double> fast(x.size()), ref(x.size());
    kernels::row_softmax(x.data(), fast.data(), rows, cols);
    kernels::row_softmax_reference(x.data(), ref.data(), rows, cols);
    CHECK(max_diff(fast, ref) <= 1e-15);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += fast[r * cols + c];
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("elementwise kernels") {
    const std::vector<double> x{-2.0, 0.0, 3.0};
    std::vector<double> y(3);
    kernels::sigmoid(x.data(), y.data(), 3);
    CHECK(y[1] == 0.5);
    CHECK(y[0] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
    kernels::tanh(x.data(), y.data(), 3);
    CHECK(y[2] == doctest::Approx(std::tanh(3.0)));
    std::vector<double> acc{1.0, 1.0, 1.0};
    kernels::axpy(2.0, x.data(), acc.data(), 3);
    CHECK(acc == std::vector<double>{-3.0, 1.0, 7.0});
}
