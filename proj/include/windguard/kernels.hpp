#pragma once

#include <cstddef>
#include <span>

// Dense row-major matrix kernels behind the autodiff tape.
//
// The default entry points are OpenMP-parallel over output rows. Every output
// element is accumulated in the same order as in the serial reference, so the
// two paths agree bit for bit regardless of thread count.
namespace windguard::kernels {

/// C[m×n] (+)= A[m×k] · B[k×n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);

/// C[k×n] += A[m×k]ᵀ · B[m×n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

/// C[m×k] += A[m×n] · B[k×n]ᵀ
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);

/// Work (multiply-adds) below which kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);

}  // namespace serial
}  // namespace windguard::kernels
