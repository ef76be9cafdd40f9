#pragma once

// Round, wall-clock and energy complexity of generalized asynchronous SGD,
// the learning-rate ceiling, and the closed-form energy-optimal routing.

#include <span>
#include <string_view>
#include <vector>

#include "asyncfl/model.hpp"

namespace asyncfl {

enum class BoundVariant { BoundedG, UnboundedG };

std::string_view to_string(BoundVariant variant);
BoundVariant parse_bound_variant(std::string_view text);

struct EnergyProfile {
    std::vector<double> per_task_cost;  // P^c/mu^c + P^u/mu^u + P^d/mu^d
    double cs_cost = 0.0;               // P^cs/mu^cs, or 0 without a central-server queue

    static EnergyProfile from_config(const SystemConfig& config);
};

struct ComplexityReport {
    double k_eps = 0.0;
    double eta_max = 0.0;
    double tau_eps = 0.0;
    double e_eps = 0.0;
    double energy_per_round = 0.0;
    double lambda = 0.0;
    Model model = Model::NoCS;
    BoundVariant bound_variant = BoundVariant::BoundedG;
};

/// Bounded-gradient round complexity K_eps(p, m).
double round_complexity(std::span<const double> p, int m, std::span<const double> delays,
                        const LearningConstants& consts, double eps);

/// System-wide staleness factor of the unbounded-gradient bound.
double system_staleness(std::span<const double> p, int m, std::span<const ClientProfile> rates);

double round_complexity_unbounded(std::span<const double> p, int m, std::span<const double> delays,
                                  std::span<const ClientProfile> rates, const LearningConstants& consts, double eps);

/// Largest admissible step size; terms with a zero denominator count as +inf.
double max_learning_rate(std::span<const double> p, int m, std::span<const double> delays,
                         const LearningConstants& consts, double eps);

double max_learning_rate_unbounded(std::span<const double> p, int m, std::span<const double> delays,
                                   std::span<const ClientProfile> rates, const LearningConstants& consts, double eps);

double expected_time(double k_eps, double lambda);

double energy_per_round(std::span<const double> p, const EnergyProfile& energy);

RoutingVector energy_optimal_routing(const EnergyProfile& energy);

/// Minimal expected energy over the simplex (attained at m = 1 by
/// energy_optimal_routing): (24 L Delta / (n^2 eps)) (4 + B/eps) (sum_i sqrt(cs + E_i))^2.
double minimal_energy(const EnergyProfile& energy, const LearningConstants& consts, double eps);

/// Every quantity above at the configuration's own routing and concurrency.
ComplexityReport complexity_report(const SystemConfig& config, const LearningConstants& consts, double eps,
                                   BoundVariant variant = BoundVariant::BoundedG);

} // namespace asyncfl
