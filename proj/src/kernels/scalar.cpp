#include "backends.hpp"

namespace asyncfl::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void gemv_scalar(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_scalar(a + r * cols, x, cols);
    }
}

} // namespace

const KernelTable scalar_table{dot_scalar, axpy_scalar, gemv_scalar};

} // namespace asyncfl::kernels::detail
