#pragma once

// Dense double-precision inner loops used by the normalization recursion,
// the second-moment coefficients and the quadratic learning tasks.
//
// Every kernel has a scalar reference implementation. SIMD variants are
// compiled in separate translation units and selected once at runtime from
// the CPU's feature flags; ASYNCFL_KERNELS=scalar|avx2|neon overrides the
// choice.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace asyncfl::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view name(Backend backend);

/// Raw entry points of one backend.
struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = A x for a row-major rows x cols matrix
    void (*gemv)(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
};

/// True when the backend was compiled in and the running CPU supports it.
bool supported(Backend backend);

/// Backends usable on this machine, scalar first.
std::vector<Backend> available_backends();

/// Throws std::invalid_argument for an unsupported backend.
const KernelTable& table(Backend backend);

Backend active_backend();

/// Switches the process-wide backend. Not thread-safe with concurrent kernel
/// calls; meant for tests and the CLI start-up path.
void set_active_backend(Backend backend);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::span<const double> x, std::span<double> y);

} // namespace asyncfl::kernels
