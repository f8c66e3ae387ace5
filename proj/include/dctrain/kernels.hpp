#pragma once

#include <cstddef>

namespace dctrain::kernels {

// Number of OpenMP threads used by the parallel kernels. Defaults to
// DCTRAIN_THREADS if set, otherwise the OpenMP default. 1 disables
// parallel regions entirely.
int num_threads();
void set_num_threads(int n);

// C (n x m) = op_a(A) * op_b(B) where op transposes when the flag is set.
// A is stored (n x k) untransposed or (k x n) transposed; B likewise.
void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t m, bool trans_a, bool trans_b);

void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void neg(const double* a, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);

// Binary op where b indexes a repeating trailing block of length bn (row
// broadcast) or a single scalar (bn == 1 behaves the same way).
void add_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn);
void sub_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn);
void rsub_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn);
void mul_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn);

template <typename F>
void map(const double* a, double* out, std::size_t n, F f) {
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i]);
}

// Reductions are serial on purpose: summation order must not depend on the
// thread count or results stop being bit-reproducible.
double sum(const double* a, std::size_t n);

// Column sums of an (n x m) matrix into out (m).
void col_sum(const double* a, std::size_t n, std::size_t m, double* out);

// Serial reference implementations, kept for testing the parallel kernels
// and for the benchmark comparison.
namespace ref {
void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t m, bool trans_a, bool trans_b);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
double sum(const double* a, std::size_t n);
void col_sum(const double* a, std::size_t n, std::size_t m, double* out);
}  // namespace ref

}  // namespace dctrain::kernels
