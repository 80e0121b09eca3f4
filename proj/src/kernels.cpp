#include "svt/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>

#include "svt/error.hpp"

namespace svt::kernels {

namespace {

void check_matmul(const Matrix& a, const Matrix& b, std::size_t ak,
                  std::size_t bk, const char* what) {
  if (ak != bk) {
    fail(ErrorKind::Shape, std::string(what) + ": inner dimensions " +
                               shape_str(a) + " vs " + shape_str(b));
  }
}

inline double dot_row_row(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t) acc += x[t] * y[t];
  return acc;
}

inline void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    denom += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= denom;
}

}  // namespace

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.rows, "matmul");
  out = Matrix(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += av * bk[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.cols, "matmul_nt");
  out = Matrix(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j)
      oi[j] = dot_row_row(ai, b.row(j), a.cols);
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.rows, b.rows, "matmul_tn");
  out = Matrix(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    double* oi = out.row(i);
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double av = a.at(k, i);
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += av * bk[j];
    }
  }
}

void row_softmax(const Matrix& in, Matrix& out) {
  out = Matrix(in.rows, in.cols);
  for (std::size_t i = 0; i < in.rows; ++i)
    softmax_row(in.row(i), out.row(i), in.cols);
}

}  // namespace serial

namespace omp {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.rows, "matmul");
  out = Matrix(a.rows, b.cols);
  const std::int64_t m = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static) if (m > 1)
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += av * bk[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.cols, "matmul_nt");
  out = Matrix(a.rows, b.rows);
  const std::int64_t m = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static) if (m > 1)
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows; ++j)
      oi[j] = dot_row_row(ai, b.row(j), a.cols);
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.rows, b.rows, "matmul_tn");
  out = Matrix(a.cols, b.cols);
  const std::int64_t m = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static) if (m > 1)
  for (std::int64_t i = 0; i < m; ++i) {
    double* oi = out.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.rows; ++k) {
      const double av = a.at(k, static_cast<std::size_t>(i));
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += av * bk[j];
    }
  }
}

void row_softmax(const Matrix& in, Matrix& out) {
  out = Matrix(in.rows, in.cols);
  const std::int64_t m = static_cast<std::int64_t>(in.rows);
#pragma omp parallel for schedule(static) if (m > 1)
  for (std::int64_t i = 0; i < m; ++i)
    softmax_row(in.row(static_cast<std::size_t>(i)),
                out.row(static_cast<std::size_t>(i)), in.cols);
}

}  // namespace omp

namespace {
std::atomic<bool> g_parallel{
#ifdef _OPENMP
    true
#else
    false
#endif
};
}  // namespace

bool parallel_enabled() { return g_parallel.load(); }
void set_parallel(bool on) { g_parallel.store(on); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  parallel_enabled() ? omp::matmul(a, b, out) : serial::matmul(a, b, out);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out;
  parallel_enabled() ? omp::matmul_nt(a, b, out)
                     : serial::matmul_nt(a, b, out);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out;
  parallel_enabled() ? omp::matmul_tn(a, b, out)
                     : serial::matmul_tn(a, b, out);
  return out;
}

Matrix row_softmax(const Matrix& in) {
  Matrix out;
  parallel_enabled() ? omp::row_softmax(in, out)
                     : serial::row_softmax(in, out);
  return out;
}

}  // namespace svt::kernels
