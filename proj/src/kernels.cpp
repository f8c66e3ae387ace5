#include "dctrain/kernels.hpp"

#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dctrain::kernels {

namespace {

int resolve_default_threads() {
  if (const char* env = std::getenv("DCTRAIN_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int g_threads = resolve_default_threads();

}  // namespace

int num_threads() { return g_threads; }
void set_num_threads(int n) { g_threads = n > 0 ? n : 1; }

namespace {

// One output row: crow[j] = sum_l arow[l] * b[l][j], accumulated in
// increasing-l order per element (bit-identical to the reference kernel).
// Column blocks are held in a local array so they stay in registers across
// the l loop instead of being stored and reloaded every iteration.
void row_times_matrix(const double* __restrict arow, const double* __restrict b,
                      double* __restrict crow, std::size_t k, std::size_t m) {
  constexpr std::size_t B = 16;
  std::size_t j = 0;
  for (; j + B <= m; j += B) {
    double acc[B] = {0.0};
    const double* bp = b + j;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = bp + l * m;
      for (std::size_t t = 0; t < B; ++t) acc[t] += av * brow[t];
    }
    for (std::size_t t = 0; t < B; ++t) crow[j + t] = acc[t];
  }
  if (j < m) {
    const std::size_t rem = m - j;
    double acc[B] = {0.0};
    const double* bp = b + j;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = bp + l * m;
      for (std::size_t t = 0; t < rem; ++t) acc[t] += av * brow[t];
    }
    for (std::size_t t = 0; t < rem; ++t) crow[j + t] = acc[t];
  }
}

}  // namespace

// Parallelized over output rows; each output element is accumulated serially
// in increasing-l order, so the result is identical to the reference for any
// thread count. trans_b is handled by transposing B into scratch once, which
// leaves every element's summation order unchanged.
void matmul(const double* __restrict a, const double* __restrict b, double* __restrict c, std::size_t n, std::size_t k,
            std::size_t m, bool trans_a, bool trans_b) {
  if (trans_a && !trans_b) {
    // A is (k, n) read column-wise; a row-per-row sweep would stride through
    // the whole of A once per output row. Stream A and B top to bottom
    // instead, with threads owning disjoint output-row ranges; each c[i][j]
    // still accumulates in increasing-l order, so the result is identical to
    // the reference for any thread count.
#pragma omp parallel num_threads(g_threads) if (g_threads > 1 && n > 8)
    {
#ifdef _OPENMP
      const std::size_t nt = static_cast<std::size_t>(omp_get_num_threads());
      const std::size_t tid = static_cast<std::size_t>(omp_get_thread_num());
#else
      const std::size_t nt = 1, tid = 0;
#endif
      const std::size_t i0 = n * tid / nt, i1 = n * (tid + 1) / nt;
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = 0; j < m; ++j) c[i * m + j] = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        const double* acol = a + l * n;
        const double* brow = b + l * m;
        for (std::size_t i = i0; i < i1; ++i) {
          const double av = acol[i];
          double* crow = c + i * m;
          for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
      }
    }
    return;
  }
  std::vector<double> bt;
  const double* bmat = b;
  if (trans_b) {
    bt.resize(k * m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < k; ++l) bt[l * m + j] = b[j * k + l];
    bmat = bt.data();
  }
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && nn > 8)
  for (std::ptrdiff_t ip = 0; ip < nn; ++ip) {
    const std::size_t i = static_cast<std::size_t>(ip);
    double* crow = c + i * m;
    if (!trans_a) {
      row_times_matrix(a + i * k, bmat, crow, k, m);
    } else {
      // trans_a && trans_b: rare; plain dot products in reference order.
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < k; ++l) acc += a[l * n + i] * bmat[l * m + j];
        crow[j] = acc;
      }
    }
  }
}

#define DCTRAIN_ELEMENTWISE(body)                                                      \
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);                            \
  _Pragma("omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1 && nn > 4096)") \
  for (std::ptrdiff_t i = 0; i < nn; ++i) {                                            \
    body;                                                                              \
  }

void add(const double* a, const double* b, double* out, std::size_t n) {
  DCTRAIN_ELEMENTWISE(out[i] = a[i] + b[i])
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  DCTRAIN_ELEMENTWISE(out[i] = a[i] - b[i])
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  DCTRAIN_ELEMENTWISE(out[i] = a[i] * b[i])
}
void neg(const double* a, double* out, std::size_t n) {
  DCTRAIN_ELEMENTWISE(out[i] = -a[i])
}
void scale(const double* a, double s, double* out, std::size_t n) {
  DCTRAIN_ELEMENTWISE(out[i] = s * a[i])
}

void add_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn) {
  DCTRAIN_ELEMENTWISE(out[i] = a[i] + b[i % bn])
}
void sub_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn) {
  DCTRAIN_ELEMENTWISE(out[i] = a[i] - b[i % bn])
}
void rsub_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn) {
  DCTRAIN_ELEMENTWISE(out[i] = b[i % bn] - a[i])
}
void mul_bcast(const double* a, const double* b, double* out, std::size_t n, std::size_t bn) {
  DCTRAIN_ELEMENTWISE(out[i] = a[i] * b[i % bn])
}

#undef DCTRAIN_ELEMENTWISE

double sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void col_sum(const double* a, std::size_t n, std::size_t m, double* out) {
  for (std::size_t j = 0; j < m; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = a + i * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += row[j];
  }
}

namespace ref {

void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t m, bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        double av = trans_a ? a[l * n + i] : a[i * k + l];
        double bv = trans_b ? b[j * k + l] : b[l * m + j];
        acc += av * bv;
      }
      c[i * m + j] = acc;
    }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
double sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}
void col_sum(const double* a, std::size_t n, std::size_t m, double* out) {
  for (std::size_t j = 0; j < m; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += a[i * m + j];
}

}  // namespace ref

}  // namespace dctrain::kernels
