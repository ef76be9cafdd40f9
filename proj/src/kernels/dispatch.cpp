#include "backends.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace asyncfl::kernels {

namespace {

bool cpu_has(Backend backend) {
    switch (backend) {
    case Backend::Scalar:
        return true;
    case Backend::Avx2:
#if defined(ASYNCFL_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Backend::Neon:
#if defined(ASYNCFL_BUILD_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

Backend parse_backend(std::string_view text) {
    if (text == "scalar") {
        return Backend::Scalar;
    }
    if (text == "avx2") {
        return Backend::Avx2;
    }
    if (text == "neon") {
        return Backend::Neon;
    }
    throw std::invalid_argument("unknown kernel backend \"" + std::string(text) + "\"");
}

Backend best_backend() {
    if (const char* env = std::getenv("ASYNCFL_KERNELS")) {
        Backend requested = parse_backend(env);
        if (!cpu_has(requested)) {
            throw std::invalid_argument("ASYNCFL_KERNELS=" + std::string(env) + " is not supported on this CPU");
        }
        return requested;
    }
    if (cpu_has(Backend::Avx2)) {
        return Backend::Avx2;
    }
    if (cpu_has(Backend::Neon)) {
        return Backend::Neon;
    }
    return Backend::Scalar;
}

struct ActiveState {
    std::atomic<const KernelTable*> table;
    std::atomic<Backend> backend;

    ActiveState() {
        Backend b = best_backend();
        backend.store(b);
        table.store(&kernels::table(b));
    }
};

ActiveState& active() {
    static ActiveState state;
    return state;
}

} // namespace

std::string_view name(Backend backend) {
    switch (backend) {
    case Backend::Scalar:
        return "scalar";
    case Backend::Avx2:
        return "avx2";
    case Backend::Neon:
        return "neon";
    }
    return "unknown";
}

bool supported(Backend backend) {
    return cpu_has(backend);
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
        if (cpu_has(b)) {
            out.push_back(b);
        }
    }
    return out;
}

const KernelTable& table(Backend backend) {
    if (!cpu_has(backend)) {
        throw std::invalid_argument("kernel backend " + std::string(name(backend)) + " is unavailable");
    }
    switch (backend) {
    case Backend::Scalar:
        return detail::scalar_table;
#if defined(ASYNCFL_BUILD_AVX2)
    case Backend::Avx2:
        return detail::avx2_table;
#endif
#if defined(ASYNCFL_BUILD_NEON)
    case Backend::Neon:
        return detail::neon_table;
#endif
    default:
        break;
    }
    throw std::invalid_argument("kernel backend " + std::string(name(backend)) + " is unavailable");
}

Backend active_backend() {
    return active().backend.load(std::memory_order_relaxed);
}

void set_active_backend(Backend backend) {
    const KernelTable& t = table(backend);
    active().table.store(&t);
    active().backend.store(backend);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    return active().table.load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("axpy: length mismatch");
    }
    active().table.load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::span<const double> x, std::span<double> y) {
    if (x.empty() || a.size() != x.size() * y.size()) {
        throw std::invalid_argument("gemv: shape mismatch");
    }
    active().table.load(std::memory_order_relaxed)->gemv(a.data(), x.data(), y.data(), y.size(), x.size());
}

} // namespace asyncfl::kernels
