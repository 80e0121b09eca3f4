#pragma once

#include "svt/matrix.hpp"

namespace svt::kernels {

// Hot inner loops, each in two builds: a plain serial reference and an
// OpenMP version parallelized over output rows. Per-element accumulation
// order is identical in both, so results are bit-equal; tests and the
// svt_bench tool compare them.

namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);     // A(m,k)·B(k,n)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);  // A(m,k)·Bᵀ(n,k)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);  // Aᵀ(k,m)·B(k,n)
void row_softmax(const Matrix& in, Matrix& out);  // max-subtracted, per row
}  // namespace serial

namespace omp {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void row_softmax(const Matrix& in, Matrix& out);
}  // namespace omp

bool parallel_enabled();
void set_parallel(bool on);

// Dispatching entry points used by the rest of the library.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix row_softmax(const Matrix& in);

}  // namespace svt::kernels
