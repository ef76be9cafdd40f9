#pragma once

// Routing optimization on the probability simplex (softmax + Adam), the
// sequential concurrency search with warm starts, and the time/energy Pareto
// sweep.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "asyncfl/complexity.hpp"
#include "asyncfl/model.hpp"

namespace asyncfl {

enum class ObjectiveKind { MinRounds, MaxThroughput, MinTime, MinEnergy, JointTimeEnergy };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view text);

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::MinTime;
    std::optional<double> rho;  // JointTimeEnergy only
    double eps = 1.0;
    LearningConstants consts;
    Model model = Model::NoCS;
    BoundVariant bound = BoundVariant::BoundedG;
    // Normalizers of the joint objective rho E/E* + (1 - rho) tau/tau*.
    double time_normalizer = 1.0;
    double energy_normalizer = 1.0;

    /// Throws std::invalid_argument when rho is present without
    /// JointTimeEnergy (or missing with it) or lies outside [0, 1].
    void check() const;
};

struct OptimizerOptions {
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double stabilizer = 1e-8;
    int budget = 2000;
    int restarts = 5;  // one warm start plus restarts - 1 random ones
    double grad_tolerance = 1e-7;
    std::uint64_t seed = 0;
};

struct TracePoint {
    int restart = 0;
    int iteration = 0;  // concurrency level for search_concurrency traces
    double objective = 0.0;
};

struct OptimizationResult {
    RoutingVector p_star;
    int m_star = 1;
    double objective_value = 0.0;
    std::vector<TracePoint> trace;
    int restarts_used = 0;
};

struct ObjectiveValue {
    double value = 0.0;
    std::vector<double> gradient;  // with respect to raw p; empty unless requested
};

/// p_j = exp(theta_j) / sum_i exp(theta_i), computed with a max shift.
RoutingVector softmax_routing(std::span<const double> theta);

/// Chain rule through the softmax: dh/dtheta_j = p_j (g_j - <g, p>).
std::vector<double> softmax_pullback(std::span<const double> p, std::span<const double> grad_p);

/// Objective and its raw-p gradient at routing p and concurrency m. Rates,
/// powers and the central server come from `config`; its routing and m are
/// ignored.
ObjectiveValue evaluate_objective(const SystemConfig& config, std::span<const double> p, int m,
                                  const ObjectiveSpec& objective, bool with_gradient = true);

/// Adam on theta with restarts. The warm start is `init` if given, else the
/// config's own routing; every other restart draws theta ~ N(0, 1).
OptimizationResult optimize_routing(const SystemConfig& config, const ObjectiveSpec& objective, int m,
                                    std::optional<std::vector<double>> init = std::nullopt,
                                    const OptimizerOptions& options = {});

/// Default first concurrency level of the sequential search.
int default_first_level(ObjectiveKind kind);

/// Levels m_first..m_last in order, each warm-started from the previous p*.
/// Stops after `patience` consecutive levels without improvement. The trace
/// holds one point per visited level (iteration = m).
OptimizationResult search_concurrency(const SystemConfig& config, const ObjectiveSpec& objective, int m_first,
                                      int m_last, int patience = 2, const OptimizerOptions& options = {});

struct ParetoPoint {
    double rho = 0.0;
    RoutingVector p_star;
    int m_star = 1;
    double time = 0.0;
    double energy = 0.0;
    double time_norm = 0.0;    // time / tau*
    double energy_norm = 0.0;  // energy / E*
};

struct ParetoFrontier {
    double tau_star = 0.0;
    double energy_star = 0.0;
    std::vector<ParetoPoint> points;
};

/// tau* comes from a MinTime search over [1, m_last], E* from the closed
/// form; both are computed once.
ParetoFrontier pareto_sweep(const SystemConfig& config, std::span<const double> rho_list, double eps,
                            const LearningConstants& consts, int m_last, int patience = 2,
                            const OptimizerOptions& options = {}, BoundVariant bound = BoundVariant::BoundedG);

} // namespace asyncfl
