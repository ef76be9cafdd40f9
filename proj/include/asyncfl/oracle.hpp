#pragma once

// Independent reference computations used by the test suites and the CLI
// `validate` subcommand. Nothing here shares code paths with the analysis
// module: moments come from summing product-form weights over every state,
// with the central-server queue kept as per-class counts.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncfl/analysis.hpp"
#include "asyncfl/model.hpp"

namespace asyncfl::oracle {

struct EnumeratedMoments {
    double z = 0.0;             // normalization constant
    std::vector<double> mean;   // E[S_i]
    Matrix second;              // E[S_i S_j]
    std::size_t states = 0;
};

/// S_i counts client i's tasks at d_i, c_i, u_i and class-i tasks at the
/// central server. Throws NumericalError past `state_cap` states.
EnumeratedMoments enumerate_moments(std::span<const ClientProfile> profiles, std::span<const double> p,
                                    int population, std::optional<double> mu_cs = std::nullopt,
                                    std::size_t state_cap = 2'000'000);

std::vector<double> delays(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                           std::optional<double> mu_cs = std::nullopt);
/// Cov(S_i, S_j) / p_j at population m - 1.
Matrix jacobian(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                std::optional<double> mu_cs = std::nullopt);
double throughput(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                  std::optional<double> mu_cs = std::nullopt);

using VectorFn = std::function<std::vector<double>(std::span<const double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences, column j = (f(x + h e_j) - f(x - h e_j)) / 2h.
Matrix finite_difference_jacobian(const VectorFn& f, std::span<const double> x, double h = 1e-6);
std::vector<double> finite_difference_gradient(const ScalarFn& f, std::span<const double> x, double h = 1e-6);

/// max |a - b| / max(|b|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// The six oracle suites run by `validate`: convolution vs brute force,
/// delays vs enumeration, Jacobian vs enumeration, Jacobian vs finite
/// differences, throughput gradient vs finite differences, and the
/// central-server model (enumeration plus the mu_cs -> inf limit).
std::vector<SuiteResult> run_oracle_suites(const SystemConfig& config);

} // namespace asyncfl::oracle
