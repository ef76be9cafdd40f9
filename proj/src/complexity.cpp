#include "asyncfl/complexity.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "asyncfl/analysis.hpp"
#include "asyncfl/buzen.hpp"

namespace asyncfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw std::invalid_argument("target accuracy eps must be positive");
    }
}

void check_shapes(std::span<const double> p, int m, std::span<const double> delays) {
    if (p.empty() || p.size() != delays.size()) {
        throw std::invalid_argument("routing and delay vectors must be non-empty and of equal length");
    }
    if (m < 1) {
        throw std::invalid_argument("concurrency m must be at least 1");
    }
}

double inverse_sum(std::span<const double> p) {
    double s = 0.0;
    for (double v : p) {
        s += 1.0 / v;
    }
    return s;
}

// sum_i D_i / p_i^2
double staleness_sum(std::span<const double> p, std::span<const double> delays) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        s += std::max(delays[i], 0.0) / (p[i] * p[i]);
    }
    return s;
}

} // namespace

std::string_view to_string(BoundVariant variant) {
    return variant == BoundVariant::BoundedG ? "bounded" : "unbounded";
}

BoundVariant parse_bound_variant(std::string_view text) {
    if (text == "bounded") {
        return BoundVariant::BoundedG;
    }
    if (text == "unbounded") {
        return BoundVariant::UnboundedG;
    }
    throw ConfigError("unknown bound variant \"" + std::string(text) + "\" (expected bounded or unbounded)");
}

EnergyProfile EnergyProfile::from_config(const SystemConfig& config) {
    EnergyProfile out;
    out.per_task_cost.reserve(config.n());
    for (const ClientProfile& c : config.clients) {
        out.per_task_cost.push_back(c.energy_per_task());
    }
    if (config.cs) {
        out.cs_cost = config.cs->p_cs / config.cs->mu_cs;
    }
    return out;
}

double round_complexity(std::span<const double> p, int m, std::span<const double> delays,
                        const LearningConstants& consts, double eps) {
    check_eps(eps);
    check_shapes(p, m, delays);
    const double n = static_cast<double>(p.size());
    const double first = (4.0 + consts.b() / eps) * inverse_sum(p) / n;
    const double second = std::sqrt(consts.c() * (m - 1) / eps * staleness_sum(p, delays));
    return 24.0 * consts.l_smooth() * consts.delta() / (n * eps) * (first + second);
}

double system_staleness(std::span<const double> p, int m, std::span<const ClientProfile> rates) {
    if (p.size() != rates.size()) {
        throw std::invalid_argument("routing and rate vectors must have equal length");
    }
    double uplink_total = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const ClientProfile& r = rates[i];
        uplink_total += r.mu_u;
        sum += (1.0 / r.mu_d + 1.0 / r.mu_u + m / r.mu_c) / (p[i] * p[i]);
    }
    return (m - 1) * uplink_total * sum;
}

double round_complexity_unbounded(std::span<const double> p, int m, std::span<const double> delays,
                                  std::span<const ClientProfile> rates, const LearningConstants& consts, double eps) {
    check_eps(eps);
    check_shapes(p, m, delays);
    const double n = static_cast<double>(p.size());
    const double b = consts.b();
    const double first = (2.0 + b / eps) * inverse_sum(p) / n;
    const double second = std::sqrt((m - 1) * system_staleness(p, m, rates));
    const double third = std::sqrt(b * (m - 1) / (2.0 * eps) * staleness_sum(p, delays));
    return 96.0 * consts.l_smooth() * consts.delta() / (n * eps) * (first + second + third);
}

double max_learning_rate(std::span<const double> p, int m, std::span<const double> delays,
                         const LearningConstants& consts, double eps) {
    check_eps(eps);
    check_shapes(p, m, delays);
    const double n = static_cast<double>(p.size());
    const double l = consts.l_smooth();
    const double inv = inverse_sum(p);
    const double b = consts.b();
    const double stale = consts.c() * (m - 1) * staleness_sum(p, delays);

    double eta = n * n / (8.0 * l * inv);
    if (b > 0.0) {
        eta = std::min(eta, n * n * eps / (2.0 * l * b * inv));
    }
    if (stale > 0.0) {
        eta = std::min(eta, n * std::sqrt(eps) / (2.0 * l) / std::sqrt(stale));
    }
    return eta;
}

double max_learning_rate_unbounded(std::span<const double> p, int m, std::span<const double> delays,
                                   std::span<const ClientProfile> rates, const LearningConstants& consts, double eps) {
    check_eps(eps);
    check_shapes(p, m, delays);
    const double n = static_cast<double>(p.size());
    const double l = consts.l_smooth();
    const double inv = inverse_sum(p);
    const double b = consts.b();
    const double stale = 2.0 * b * (m - 1) * staleness_sum(p, delays);
    const double sys = (m - 1) * system_staleness(p, m, rates);

    double eta = n * n / (8.0 * l * inv);
    if (b > 0.0) {
        eta = std::min(eta, n * n * eps / (4.0 * l * b * inv));
    }
    if (stale > 0.0) {
        eta = std::min(eta, n * std::sqrt(eps) / (2.0 * l) / std::sqrt(stale));
    }
    if (sys > 0.0) {
        eta = std::min(eta, n / (4.0 * l * std::sqrt(sys)));
    }
    return eta;
}

double expected_time(double k_eps, double lambda) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("throughput must be positive");
    }
    return k_eps / lambda;
}

double energy_per_round(std::span<const double> p, const EnergyProfile& energy) {
    if (p.size() != energy.per_task_cost.size()) {
        throw std::invalid_argument("routing and energy profile lengths differ");
    }
    double total = energy.cs_cost;
    for (std::size_t i = 0; i < p.size(); ++i) {
        total += p[i] * energy.per_task_cost[i];
    }
    return total;
}

RoutingVector energy_optimal_routing(const EnergyProfile& energy) {
    if (energy.per_task_cost.empty()) {
        throw std::invalid_argument("energy profile has no clients");
    }
    std::vector<double> p;
    p.reserve(energy.per_task_cost.size());
    for (double e : energy.per_task_cost) {
        const double cost = energy.cs_cost + e;
        if (!(cost > 0.0)) {
            throw std::invalid_argument("energy-optimal routing is undefined when a client's task costs nothing");
        }
        p.push_back(1.0 / std::sqrt(cost));
    }
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) {
        v /= total;
    }
    return RoutingVector(std::move(p));
}

double minimal_energy(const EnergyProfile& energy, const LearningConstants& consts, double eps) {
    check_eps(eps);
    const double n = static_cast<double>(energy.per_task_cost.size());
    double root_sum = 0.0;
    for (double e : energy.per_task_cost) {
        root_sum += std::sqrt(energy.cs_cost + e);
    }
    return 24.0 * consts.l_smooth() * consts.delta() / (n * n * eps) * (4.0 + consts.b() / eps) * root_sum * root_sum;
}

ComplexityReport complexity_report(const SystemConfig& config, const LearningConstants& consts, double eps,
                                   BoundVariant variant) {
    validate(config);
    const std::span<const double> p = config.routing.values();
    NetworkInputs net{config.clients, p, std::nullopt};
    if (config.cs) {
        net.mu_cs = config.cs->mu_cs;
    }
    const NormalizationTable table = normalization_constants(net.model(), config.clients, p, config.m, net.mu_cs);
    const std::vector<double> d = delays(table, net, config.m);

    ComplexityReport out;
    out.model = net.model();
    out.bound_variant = variant;
    out.lambda = throughput(table);
    if (variant == BoundVariant::BoundedG) {
        out.k_eps = round_complexity(p, config.m, d, consts, eps);
        out.eta_max = max_learning_rate(p, config.m, d, consts, eps);
    } else {
        out.k_eps = round_complexity_unbounded(p, config.m, d, config.clients, consts, eps);
        out.eta_max = max_learning_rate_unbounded(p, config.m, d, config.clients, consts, eps);
    }
    out.tau_eps = expected_time(out.k_eps, out.lambda);
    out.energy_per_round = energy_per_round(p, EnergyProfile::from_config(config));
    out.e_eps = out.k_eps * out.energy_per_round;
    return out;
}

} // namespace asyncfl
