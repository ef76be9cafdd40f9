#include "asyncfl/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "asyncfl/analysis.hpp"
#include "asyncfl/buzen.hpp"

namespace asyncfl {

namespace {

struct RoundsValue {
    double k = 0.0;
    std::vector<double> grad;
};

// K_eps and its gradient. The staleness sum S = sum_i D_i / p_i^2 enters
// through a square root, so its gradient needs the delay Jacobian only as a
// vector-Jacobian product with weights 1 / p_i^2.
RoundsValue rounds(const SystemConfig& config, const NormalizationTable& table, const NetworkInputs& net, int m,
                   const ObjectiveSpec& obj, bool with_gradient) {
    const std::span<const double> p = net.p;
    const std::size_t n = p.size();
    const std::vector<double> d = delays(table, net, m);
    const LearningConstants& k = obj.consts;
    const double eps = obj.eps;
    const double nn = static_cast<double>(n);
    const double lead_scale = (obj.bound == BoundVariant::BoundedG ? 24.0 : 96.0) * k.l_smooth() * k.delta() /
                              (nn * eps);

    RoundsValue out;
    out.k = obj.bound == BoundVariant::BoundedG
                ? round_complexity(p, m, d, k, eps)
                : round_complexity_unbounded(p, m, d, config.clients, k, eps);
    if (!with_gradient) {
        return out;
    }

    out.grad.assign(n, 0.0);
    const double first_coeff = (obj.bound == BoundVariant::BoundedG ? 4.0 : 2.0) + k.b() / eps;
    for (std::size_t j = 0; j < n; ++j) {
        out.grad[j] = -lead_scale * first_coeff / (nn * p[j] * p[j]);
    }
    if (m == 1) {
        return out;
    }

    double stale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stale += d[i] / (p[i] * p[i]);
    }
    const double factor = obj.bound == BoundVariant::BoundedG ? k.c() * (m - 1) / eps : k.b() * (m - 1) / (2.0 * eps);
    if (stale > 0.0 && factor > 0.0) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 1.0 / (p[i] * p[i]);
        }
        const std::vector<double> vjp = delay_vjp(table, net, m, w);
        const double outer = lead_scale * factor / (2.0 * std::sqrt(factor * stale));
        for (std::size_t j = 0; j < n; ++j) {
            out.grad[j] += outer * (vjp[j] - 2.0 * d[j] / (p[j] * p[j] * p[j]));
        }
    }
    if (obj.bound == BoundVariant::UnboundedG) {
        // sqrt((m - 1) S_sys) with S_sys = (m - 1) |mu_u| sum_i c_i / p_i^2
        const double sys = (m - 1) * system_staleness(p, m, config.clients);
        if (sys > 0.0) {
            double uplink_total = 0.0;
            for (const ClientProfile& c : config.clients) {
                uplink_total += c.mu_u;
            }
            const double outer = lead_scale / (2.0 * std::sqrt(sys));
            for (std::size_t j = 0; j < n; ++j) {
                const ClientProfile& c = config.clients[j];
                const double cj = 1.0 / c.mu_d + 1.0 / c.mu_u + m / c.mu_c;
                out.grad[j] += outer * (m - 1) * (m - 1) * uplink_total * (-2.0 * cj / (p[j] * p[j] * p[j]));
            }
        }
    }
    return out;
}

std::vector<double> log_theta(std::span<const double> p) {
    std::vector<double> theta(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        theta[i] = std::log(p[i]);
    }
    return theta;
}

struct RestartOutcome {
    std::vector<double> p;
    double value = std::numeric_limits<double>::infinity();
};

RestartOutcome run_adam(const SystemConfig& config, const ObjectiveSpec& objective, int m, std::vector<double> theta,
                        const OptimizerOptions& opt, int restart, std::vector<TracePoint>& trace) {
    const std::size_t n = theta.size();
    std::vector<double> first(n, 0.0);
    std::vector<double> second(n, 0.0);
    RestartOutcome best;
    double b1_power = 1.0;
    double b2_power = 1.0;

    for (int it = 0; it <= opt.budget; ++it) {
        const RoutingVector p = softmax_routing(theta);
        const bool last = it == opt.budget;
        const ObjectiveValue ov = evaluate_objective(config, p.values(), m, objective, !last);
        if (!std::isfinite(ov.value)) {
            if (it == 0) {
                throw std::invalid_argument("objective is not finite at the initial routing");
            }
            break;
        }
        trace.push_back({restart, it, ov.value});
        if (ov.value < best.value) {
            best.value = ov.value;
            best.p = p.vector();
        }
        if (last) {
            break;
        }
        const std::vector<double> g = softmax_pullback(p.values(), ov.gradient);
        double g_inf = 0.0;
        for (double v : g) {
            g_inf = std::max(g_inf, std::abs(v));
        }
        if (!std::isfinite(g_inf) || g_inf < opt.grad_tolerance) {
            break;
        }
        b1_power *= opt.beta1;
        b2_power *= opt.beta2;
        for (std::size_t j = 0; j < n; ++j) {
            first[j] = opt.beta1 * first[j] + (1.0 - opt.beta1) * g[j];
            second[j] = opt.beta2 * second[j] + (1.0 - opt.beta2) * g[j] * g[j];
            const double m_hat = first[j] / (1.0 - b1_power);
            const double v_hat = second[j] / (1.0 - b2_power);
            theta[j] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.stabilizer);
        }
    }
    return best;
}

} // namespace

std::string_view to_string(ObjectiveKind kind) {
    switch (kind) {
    case ObjectiveKind::MinRounds:
        return "min-rounds";
    case ObjectiveKind::MaxThroughput:
        return "max-throughput";
    case ObjectiveKind::MinTime:
        return "min-time";
    case ObjectiveKind::MinEnergy:
        return "min-energy";
    case ObjectiveKind::JointTimeEnergy:
        return "joint";
    }
    return "unknown";
}

ObjectiveKind parse_objective(std::string_view text) {
    for (ObjectiveKind k : {ObjectiveKind::MinRounds, ObjectiveKind::MaxThroughput, ObjectiveKind::MinTime,
                            ObjectiveKind::MinEnergy, ObjectiveKind::JointTimeEnergy}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown objective \"" + std::string(text) +
                      "\" (expected min-rounds, max-throughput, min-time, min-energy or joint)");
}

void ObjectiveSpec::check() const {
    if (kind == ObjectiveKind::JointTimeEnergy) {
        if (!rho || !(*rho >= 0.0 && *rho <= 1.0)) {
            throw std::invalid_argument("joint objective needs rho in [0, 1]");
        }
        if (!(time_normalizer > 0.0) || !(energy_normalizer > 0.0)) {
            throw std::invalid_argument("joint objective needs positive normalizers");
        }
    } else if (rho) {
        throw std::invalid_argument("rho is only meaningful for the joint objective");
    }
    if (!(eps > 0.0)) {
        throw std::invalid_argument("target accuracy eps must be positive");
    }
}

RoutingVector softmax_routing(std::span<const double> theta) {
    if (theta.empty()) {
        throw std::invalid_argument("softmax of an empty vector");
    }
    const double shift = *std::max_element(theta.begin(), theta.end());
    std::vector<double> p(theta.size());
    double total = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        p[i] = std::exp(theta[i] - shift);
        total += p[i];
    }
    for (double& v : p) {
        v = std::max(v / total, 10.0 * RoutingVector::kMinProbability);
    }
    // Re-normalize after flooring so the sum is one to rounding.
    total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) {
        v /= total;
    }
    return RoutingVector(std::move(p));
}

std::vector<double> softmax_pullback(std::span<const double> p, std::span<const double> grad_p) {
    if (p.size() != grad_p.size()) {
        throw std::invalid_argument("softmax_pullback: length mismatch");
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        mean += grad_p[i] * p[i];
    }
    std::vector<double> out(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        out[j] = p[j] * (grad_p[j] - mean);
    }
    return out;
}

ObjectiveValue evaluate_objective(const SystemConfig& config, std::span<const double> p, int m,
                                  const ObjectiveSpec& objective, bool with_gradient) {
    objective.check();
    require_model(config, objective.model);
    if (p.size() != config.n()) {
        throw std::invalid_argument("routing length does not match the number of clients");
    }
    NetworkInputs net{config.clients, p, std::nullopt};
    if (objective.model == Model::WithCS) {
        net.mu_cs = config.cs->mu_cs;
    }
    const NormalizationTable table = normalization_constants(net.model(), config.clients, p, m, net.mu_cs);
    const std::size_t n = p.size();
    ObjectiveValue out;

    auto lambda_terms = [&](double& lambda, std::vector<double>& grad) {
        lambda = throughput(table);
        if (with_gradient) {
            grad = throughput_gradient(table, net, m);
        }
    };

    EnergyProfile energy = EnergyProfile::from_config(config);
    if (objective.model == Model::NoCS) {
        energy.cs_cost = 0.0;
    }

    switch (objective.kind) {
    case ObjectiveKind::MinRounds: {
        RoundsValue r = rounds(config, table, net, m, objective, with_gradient);
        out.value = r.k;
        out.gradient = std::move(r.grad);
        break;
    }
    case ObjectiveKind::MaxThroughput: {
        // Minimize 1 / lambda, the mean time per round.
        double lambda = 0.0;
        std::vector<double> gl;
        lambda_terms(lambda, gl);
        out.value = 1.0 / lambda;
        if (with_gradient) {
            out.gradient.resize(n);
            for (std::size_t j = 0; j < n; ++j) {
                out.gradient[j] = -gl[j] / (lambda * lambda);
            }
        }
        break;
    }
    case ObjectiveKind::MinTime:
    case ObjectiveKind::MinEnergy:
    case ObjectiveKind::JointTimeEnergy: {
        RoundsValue r = rounds(config, table, net, m, objective, with_gradient);
        double lambda = 0.0;
        std::vector<double> gl;
        double time_w = 0.0;
        double energy_w = 0.0;
        if (objective.kind == ObjectiveKind::MinTime) {
            time_w = 1.0;
        } else if (objective.kind == ObjectiveKind::MinEnergy) {
            energy_w = 1.0;
        } else {
            time_w = (1.0 - *objective.rho) / objective.time_normalizer;
            energy_w = *objective.rho / objective.energy_normalizer;
        }
        const double e_round = energy_per_round(p, energy);
        out.value = 0.0;
        if (time_w > 0.0) {
            lambda_terms(lambda, gl);
            out.value += time_w * r.k / lambda;
        }
        if (energy_w > 0.0) {
            out.value += energy_w * r.k * e_round;
        }
        if (with_gradient) {
            out.gradient.assign(n, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (time_w > 0.0) {
                    out.gradient[j] += time_w * (r.grad[j] / lambda - r.k * gl[j] / (lambda * lambda));
                }
                if (energy_w > 0.0) {
                    out.gradient[j] += energy_w * (r.grad[j] * e_round + r.k * energy.per_task_cost[j]);
                }
            }
        }
        break;
    }
    }
    return out;
}

OptimizationResult optimize_routing(const SystemConfig& config, const ObjectiveSpec& objective, int m,
                                    std::optional<std::vector<double>> init, const OptimizerOptions& options) {
    validate(config);
    objective.check();
    if (m < 1) {
        throw std::invalid_argument("concurrency m must be at least 1");
    }
    if (options.budget <= 0) {
        throw std::invalid_argument("optimizer budget must be positive");
    }
    if (options.restarts < 1) {
        throw std::invalid_argument("at least one restart is required");
    }
    const std::size_t n = config.n();
    std::vector<double> warm = init ? *init : log_theta(config.routing.values());
    if (warm.size() != n) {
        throw std::invalid_argument("initial theta length does not match the number of clients");
    }

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    OptimizationResult result;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.restarts; ++r) {
        std::vector<double> theta = warm;
        if (r > 0) {
            for (double& v : theta) {
                v = normal(rng);
            }
        }
        RestartOutcome outcome = run_adam(config, objective, m, std::move(theta), options, r, result.trace);
        ++result.restarts_used;
        // Strict improvement only: ties keep the lowest restart index.
        if (outcome.value < best) {
            best = outcome.value;
            result.p_star = RoutingVector(std::move(outcome.p));
        }
    }
    result.m_star = m;
    result.objective_value = evaluate_objective(config, result.p_star.values(), m, objective, false).value;
    return result;
}

int default_first_level(ObjectiveKind kind) {
    return kind == ObjectiveKind::MinTime ? 2 : 1;
}

OptimizationResult search_concurrency(const SystemConfig& config, const ObjectiveSpec& objective, int m_first,
                                      int m_last, int patience, const OptimizerOptions& options) {
    if (m_first < 1 || m_last < m_first) {
        throw std::invalid_argument("concurrency range must be non-empty and start at 1 or above");
    }
    if (patience < 1) {
        throw std::invalid_argument("patience must be at least 1");
    }
    OptimizationResult best;
    best.objective_value = std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> warm;
    int stale_levels = 0;
    int restarts = 0;
    for (int m = m_first; m <= m_last; ++m) {
        OptimizationResult level = optimize_routing(config, objective, m, warm, options);
        restarts += level.restarts_used;
        best.trace.push_back({0, m, level.objective_value});
        warm = log_theta(level.p_star.values());
        if (level.objective_value < best.objective_value) {
            best.objective_value = level.objective_value;
            best.p_star = level.p_star;
            best.m_star = m;
            stale_levels = 0;
        } else if (++stale_levels >= patience) {
            break;
        }
    }
    best.restarts_used = restarts;
    return best;
}

ParetoFrontier pareto_sweep(const SystemConfig& config, std::span<const double> rho_list, double eps,
                            const LearningConstants& consts, int m_last, int patience, const OptimizerOptions& options,
                            BoundVariant bound) {
    for (double rho : rho_list) {
        if (!(rho >= 0.0 && rho <= 1.0)) {
            throw std::invalid_argument("every rho must lie in [0, 1]");
        }
    }
    const Model model = config.cs ? Model::WithCS : Model::NoCS;
    ObjectiveSpec time_obj{ObjectiveKind::MinTime, std::nullopt, eps, consts, model, bound};
    ParetoFrontier frontier;
    frontier.tau_star = search_concurrency(config, time_obj, 1, m_last, patience, options).objective_value;
    EnergyProfile energy = EnergyProfile::from_config(config);
    frontier.energy_star = minimal_energy(energy, consts, eps);
    if (bound == BoundVariant::UnboundedG) {
        // No closed form for this bound; use the m = 1 optimum found numerically.
        ObjectiveSpec energy_obj{ObjectiveKind::MinEnergy, std::nullopt, eps, consts, model, bound};
        frontier.energy_star = optimize_routing(config, energy_obj, 1, std::nullopt, options).objective_value;
    }

    ObjectiveSpec time_only = time_obj;
    ObjectiveSpec energy_only{ObjectiveKind::MinEnergy, std::nullopt, eps, consts, model, bound};
    for (double rho : rho_list) {
        ObjectiveSpec joint{ObjectiveKind::JointTimeEnergy, rho, eps, consts, model, bound,
                            frontier.tau_star, frontier.energy_star};
        OptimizationResult r = search_concurrency(config, joint, 1, m_last, patience, options);
        ParetoPoint point;
        point.rho = rho;
        point.p_star = r.p_star;
        point.m_star = r.m_star;
        point.time = evaluate_objective(config, r.p_star.values(), r.m_star, time_only, false).value;
        point.energy = evaluate_objective(config, r.p_star.values(), r.m_star, energy_only, false).value;
        point.time_norm = point.time / frontier.tau_star;
        point.energy_norm = point.energy / frontier.energy_star;
        frontier.points.push_back(std::move(point));
    }
    return frontier;
}

} // namespace asyncfl
