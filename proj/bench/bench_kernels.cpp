// Timing comparison of the OpenMP kernels against the serial references.
#include <chrono>
#include <cstdio>
#include <vector>

#include "dctrain/kernels.hpp"
#include "dctrain/rng.hpp"

using namespace dctrain;

namespace {

double seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_best_of(F f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    double t0 = seconds();
    f();
    best = std::min(best, seconds() - t0);
  }
  return best;
}

void bench_matmul(std::size_t n, std::size_t k, std::size_t m) {
  Rng rng(1);
  std::vector<double> a(n * k), b(k * m), c(n * m), cref(n * m);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal();
  int reps = n >= 512 ? 5 : 20;
  double t_omp = time_best_of(
      [&] { kernels::matmul(a.data(), b.data(), c.data(), n, k, m, false, false); }, reps);
  double t_ref = time_best_of(
      [&] { kernels::ref::matmul(a.data(), b.data(), cref.data(), n, k, m, false, false); }, reps);
  bool same = c == cref;
  std::printf("matmul %4zux%4zux%4zu  omp %8.3f ms  serial %8.3f ms  speedup %5.2fx  %s\n", n, k,
              m, t_omp * 1e3, t_ref * 1e3, t_ref / t_omp, same ? "match" : "MISMATCH");
}

void bench_elementwise(std::size_t n) {
  Rng rng(2);
  std::vector<double> a(n), b(n), out(n), outref(n);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal();
  double t_omp = time_best_of([&] { kernels::mul(a.data(), b.data(), out.data(), n); }, 50);
  double t_ref = time_best_of([&] { kernels::ref::mul(a.data(), b.data(), outref.data(), n); }, 50);
  bool same = out == outref;
  std::printf("mul    n=%-9zu     omp %8.3f ms  serial %8.3f ms  speedup %5.2fx  %s\n", n,
              t_omp * 1e3, t_ref * 1e3, t_ref / t_omp, same ? "match" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", kernels::num_threads());
  for (std::size_t s : {64, 128, 256, 512}) bench_matmul(s, s, s);
  bench_matmul(2000, 2, 64);   // training-shaped: batch x features
  bench_matmul(2000, 64, 64);  // training-shaped: hidden layer
  for (std::size_t n : {1u << 14, 1u << 18, 1u << 22}) bench_elementwise(n);
  return 0;
}
