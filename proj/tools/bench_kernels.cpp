// Timing comparison of the serial reference kernels against the OpenMP
// versions, plus a bitwise equality check between the two.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "svt/kernels.hpp"
#include "svt/rng.hpp"

namespace {

using namespace svt;
using Kernel = std::function<void(const Matrix&, const Matrix&, Matrix&)>;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         reps;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(double)) == 0;
}

void bench_pair(const char* name, const Kernel& serial, const Kernel& omp,
                const Matrix& a, const Matrix& b, int reps) {
  Matrix out_serial, out_omp;
  const double t_serial =
      time_ms([&] { serial(a, b, out_serial); }, reps);
  const double t_omp = time_ms([&] { omp(a, b, out_omp); }, reps);
  const bool equal = bit_equal(out_serial, out_omp);
  std::printf("%-12s %4zux%-4zu serial %8.3f ms   omp %8.3f ms   speedup "
              "%5.2fx   bit-equal %s\n",
              name, a.rows, a.cols, t_serial, t_omp, t_serial / t_omp,
              equal ? "yes" : "NO");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; omp columns run the same serial path\n");
#endif
  Rng rng(42);
  for (std::size_t n : {64, 128, 256, 512}) {
    const Matrix a = Matrix::uniform(n, n, -1.0, 1.0, rng);
    const Matrix b = Matrix::uniform(n, n, -1.0, 1.0, rng);
    const int reps = n <= 128 ? 20 : 5;
    bench_pair("matmul", kernels::serial::matmul, kernels::omp::matmul, a, b,
               reps);
    bench_pair("matmul_nt", kernels::serial::matmul_nt,
               kernels::omp::matmul_nt, a, b, reps);
    bench_pair("matmul_tn", kernels::serial::matmul_tn,
               kernels::omp::matmul_tn, a, b, reps);
    Matrix sm_serial, sm_omp;
    const double t_s =
        time_ms([&] { kernels::serial::row_softmax(a, sm_serial); }, reps);
    const double t_p =
        time_ms([&] { kernels::omp::row_softmax(a, sm_omp); }, reps);
    std::printf("%-12s %4zux%-4zu serial %8.3f ms   omp %8.3f ms   speedup "
                "%5.2fx   bit-equal %s\n",
                "row_softmax", n, n, t_s, t_p, t_s / t_p,
                bit_equal(sm_serial, sm_omp) ? "yes" : "NO");
  }
  return 0;
}
