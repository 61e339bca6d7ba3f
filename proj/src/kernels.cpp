#include "ocrfix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ocrfix::kernels {

namespace {

constexpr std::size_t kNR = 16;   // columns per register tile
constexpr std::size_t kMR = 8;    // rows per register tile
constexpr std::size_t kParallelFlops = 1u << 18;

template <std::size_t MR>
inline void tile_full(const double* a, const double* b, double* c, std::size_t k, std::size_t lda,
                      std::size_t ldb, std::size_t ldc, bool accumulate) {
    double acc[MR][kNR] = {};
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * ldb;
        for (std::size_t r = 0; r < MR; ++r) {
            const double av = a[r * lda + p];
#pragma omp simd
            for (std::size_t j = 0; j < kNR; ++j) acc[r][j] += av * brow[j];
        }
    }
    for (std::size_t r = 0; r < MR; ++r) {
        double* crow = c + r * ldc;
        if (accumulate) {
            for (std::size_t j = 0; j < kNR; ++j) crow[j] += acc[r][j];
        } else {
            for (std::size_t j = 0; j < kNR; ++j) crow[j] = acc[r][j];
        }
    }
}

inline void tile_edge(const double* a, const double* b, double* c, std::size_t mr, std::size_t nr,
                      std::size_t k, std::size_t lda, std::size_t ldb, std::size_t ldc, bool accumulate) {
    double acc[kMR][kNR] = {};
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * ldb;
        for (std::size_t r = 0; r < mr; ++r) {
            const double av = a[r * lda + p];
            for (std::size_t j = 0; j < nr; ++j) acc[r][j] += av * brow[j];
        }
    }
    for (std::size_t r = 0; r < mr; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t j = 0; j < nr; ++j) crow[j] = accumulate ? crow[j] + acc[r][j] : acc[r][j];
    }
}

inline void tile(const double* a, const double* b, double* c, std::size_t mr, std::size_t nr,
                 std::size_t k, std::size_t lda, std::size_t ldb, std::size_t ldc, bool accumulate) {
    if (nr == kNR) {
        switch (mr) {
            case 8: return tile_full<8>(a, b, c, k, lda, ldb, ldc, accumulate);
            case 4: return tile_full<4>(a, b, c, k, lda, ldb, ldc, accumulate);
            case 2: return tile_full<2>(a, b, c, k, lda, ldb, ldc, accumulate);
            case 1: return tile_full<1>(a, b, c, k, lda, ldb, ldc, accumulate);
            default: break;
        }
    }
    tile_edge(a, b, c, mr, nr, k, lda, ldb, ldc, accumulate);
}

template <std::size_t MR>
inline void tile_packed_mr(const double* a, const double* bp, double* c, std::size_t nr, std::size_t k,
                           std::size_t lda, std::size_t ldc, bool accumulate) {
    double acc[MR][kNR] = {};
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = bp + p * kNR;
        for (std::size_t r = 0; r < MR; ++r) {
            const double av = a[r * lda + p];
#pragma omp simd
            for (std::size_t j = 0; j < kNR; ++j) acc[r][j] += av * brow[j];
        }
    }
    for (std::size_t r = 0; r < MR; ++r) {
        double* crow = c + r * ldc;
        if (accumulate) {
            for (std::size_t j = 0; j < nr; ++j) crow[j] += acc[r][j];
        } else {
            for (std::size_t j = 0; j < nr; ++j) crow[j] = acc[r][j];
        }
    }
}

// B panel already packed as [k][kNR].
inline void tile_packed(const double* a, const double* bp, double* c, std::size_t mr, std::size_t nr,
                        std::size_t k, std::size_t lda, std::size_t ldc, bool accumulate) {
    switch (mr) {
        case 8: return tile_packed_mr<8>(a, bp, c, nr, k, lda, ldc, accumulate);
        case 4: return tile_packed_mr<4>(a, bp, c, nr, k, lda, ldc, accumulate);
        case 2: return tile_packed_mr<2>(a, bp, c, nr, k, lda, ldc, accumulate);
        default: return tile_packed_mr<1>(a, bp, c, nr, k, lda, ldc, accumulate);
    }
}

// Row tiles: full 8-row tiles, then the remainder split as 4/2/1 so the
// common small batch sizes still hit a vectorized path.
std::vector<std::pair<std::size_t, std::size_t>> row_tiles(std::size_t m) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i + kMR <= m) {
        out.emplace_back(i, kMR);
        i += kMR;
    }
    for (std::size_t step : {4u, 2u, 1u}) {
        while (i + step <= m) {
            out.emplace_back(i, step);
            i += step;
        }
    }
    return out;
}

void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols) {
    constexpr std::size_t kB = 32;
    for (std::size_t i0 = 0; i0 < rows; i0 += kB)
        for (std::size_t j0 = 0; j0 < cols; j0 += kB)
            for (std::size_t i = i0; i < std::min(rows, i0 + kB); ++i)
                for (std::size_t j = j0; j < std::min(cols, j0 + kB); ++j) dst[j * rows + i] = src[i * cols + j];
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate) std::fill(c, c + m * n, 0.0);
        return;
    }
    const auto rows = row_tiles(m);
    const std::size_t col_tiles = (n + kNR - 1) / kNR;
    const std::size_t n_row_tiles = rows.size();
    const bool parallel = m * n * k >= kParallelFlops;
    if (m < kMR) {
        for (std::size_t jt = 0; jt < col_tiles; ++jt) {
            const std::size_t j0 = jt * kNR;
            for (const auto& [i0, mr] : rows)
                tile(a + i0 * k, b + j0, c + i0 * n + j0, mr, std::min(kNR, n - j0), k, k, n, n, accumulate);
        }
        return;
    }
    // Column panels of B packed contiguously as [k][kNR], zero padded.
    thread_local std::vector<double> packed;
    packed.assign(col_tiles * k * kNR, 0.0);
    double* const panels_out = packed.data();
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t jt = 0; jt < col_tiles; ++jt) {
        const std::size_t j0 = jt * kNR;
        const std::size_t nr = std::min(kNR, n - j0);
        double* dst = panels_out + jt * k * kNR;
        for (std::size_t p = 0; p < k; ++p) std::copy(b + p * n + j0, b + p * n + j0 + nr, dst + p * kNR);
    }
    const double* panels = packed.data();
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
    for (std::size_t jt = 0; jt < col_tiles; ++jt) {
        for (std::size_t it = 0; it < n_row_tiles; ++it) {
            const std::size_t j0 = jt * kNR;
            const std::size_t nr = std::min(kNR, n - j0);
            const auto [i0, mr] = rows[it];
            tile_packed(a + i0 * k, panels + jt * k * kNR, c + i0 * n + j0, mr, nr, k, k, n, accumulate);
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    thread_local std::vector<double> scratch;
    scratch.resize(m * k);
    transpose(a, scratch.data(), k, m);
    gemm_nn(scratch.data(), b, c, m, k, n, accumulate);
}

namespace {

// C[i0.., j0..] over an MR x NR block of dot products a_row(i) . b_row(j),
// both rows contiguous in memory.
template <std::size_t MR, std::size_t NR>
inline void dot_tile(const double* a, const double* b, double* c, std::size_t k, std::size_t ldc,
                     bool accumulate) {
    constexpr std::size_t kL = 8;
    double acc[MR][NR][kL] = {};
    std::size_t p = 0;
    for (; p + kL <= k; p += kL) {
        for (std::size_t r = 0; r < MR; ++r)
            for (std::size_t q = 0; q < NR; ++q) {
                const double* ar = a + r * k + p;
                const double* bq = b + q * k + p;
#pragma omp simd
                for (std::size_t l = 0; l < kL; ++l) acc[r][q][l] += ar[l] * bq[l];
            }
    }
    for (std::size_t r = 0; r < MR; ++r)
        for (std::size_t q = 0; q < NR; ++q) {
            double s = 0.0;
            for (std::size_t l = 0; l < kL; ++l) s += acc[r][q][l];
            for (std::size_t pp = p; pp < k; ++pp) s += a[r * k + pp] * b[q * k + pp];
            double& out = c[r * ldc + q];
            out = accumulate ? out + s : s;
        }
}

template <std::size_t MR>
inline void dot_row_block(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                          std::size_t j0, std::size_t j1, bool accumulate) {
    std::size_t j = j0;
    for (; j + 4 <= j1; j += 4) dot_tile<MR, 4>(a, b + j * k, c + j, k, n, accumulate);
    for (; j < j1; ++j) dot_tile<MR, 1>(a, b + j * k, c + j, k, n, accumulate);
}

}  // namespace

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (m >= 64) {
        // Large row counts amortize an explicit transpose into the nn kernel.
        thread_local std::vector<double> scratch;
        scratch.resize(k * n);
        transpose(b, scratch.data(), n, k);
        gemm_nn(a, scratch.data(), c, m, k, n, accumulate);
        return;
    }
    constexpr std::size_t kJB = 64;
    const std::size_t col_blocks = (n + kJB - 1) / kJB;
    const bool parallel = m * n * k >= kParallelFlops;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t jb = 0; jb < col_blocks; ++jb) {
        const std::size_t j0 = jb * kJB;
        const std::size_t j1 = std::min(n, j0 + kJB);
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) dot_row_block<4>(a + i * k, b, c + i * n, k, n, j0, j1, accumulate);
        for (; i < m; ++i) dot_row_block<1>(a + i * k, b, c + i * n, k, n, j0, j1, accumulate);
    }
}

void gemm_nn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
}

void gemm_tn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
}

void gemm_nt_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
}

void row_softmax(const double* x, double* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols >= (1u << 16))
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        double* yr = out + r * cols;
        const double mx = *std::max_element(xr, xr + cols);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            total += yr[j];
        }
        const double inv = 1.0 / total;
        for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

void row_softmax_reference(const double* x, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = x[r * cols];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[r * cols + j]);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) total += std::exp(x[r * cols + j] - mx);
        for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = std::exp(x[r * cols + j] - mx) / total;
    }
}

void sigmoid(const double* x, double* out, std::size_t n) {
#pragma omp parallel for simd schedule(static) if (n >= (1u << 16))
    for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void tanh(const double* x, double* out, std::size_t n) {
#pragma omp parallel for simd schedule(static) if (n >= (1u << 16))
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for simd schedule(static) if (n >= (1u << 17))
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace ocrfix::kernels
