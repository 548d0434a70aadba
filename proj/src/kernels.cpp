#include "windguard/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace windguard::kernels {

namespace {

bool go_parallel(std::size_t work) { return work >= kParallelThreshold; }

}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(m * n), 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = pc + i * n;
    const double* arow = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
  for (std::int64_t p = 0; p < rows; ++p) {
    double* crow = pc + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* arow = pa + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = pb + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      pc[i * k + p] += acc;
    }
  }
}

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        if (a[i * k + p] == 0.0) continue;
        acc += a[i * k + p] * b[p * n + j];
      }
      c[i * n + j] = acc;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[p * n + j];
      for (std::size_t i = 0; i < m; ++i) {
        if (a[i * k + p] == 0.0) continue;
        acc += a[i * k + p] * b[i * n + j];
      }
      c[p * n + j] = acc;
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * b[p * n + j];
      c[i * k + p] += acc;
    }
  }
}

}  // namespace serial
}  // namespace windguard::kernels
