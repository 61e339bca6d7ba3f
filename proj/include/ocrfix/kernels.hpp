#pragma once

#include <cstddef>

// Dense row-major kernels behind the autodiff ops. Each kernel has a
// straightforward serial reference (`*_reference`) kept for tests and the
// benchmark; the production versions are blocked and OpenMP-parallel over
// independent output tiles, so results do not depend on the thread count.
namespace ocrfix::kernels {

// C[M x N] (+)= A[M x K] * B[K x N]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// C[M x N] (+)= A^T * B with A stored as [K x M]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// C[M x N] (+)= A * B^T with B stored as [N x K]
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

void gemm_nn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate);
void gemm_tn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate);
void gemm_nt_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n, bool accumulate);

// out[r, :] = softmax(x[r, :]) for `rows` rows of width `cols`.
void row_softmax(const double* x, double* out, std::size_t rows, std::size_t cols);
void row_softmax_reference(const double* x, double* out, std::size_t rows, std::size_t cols);

void sigmoid(const double* x, double* out, std::size_t n);
void tanh(const double* x, double* out, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

}  // namespace ocrfix::kernels
