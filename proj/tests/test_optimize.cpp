#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "asyncfl/oracle.hpp"
#include "asyncfl/optimize.hpp"

using namespace asyncfl;

namespace {

const LearningConstants kTwoClient(1.0, 1.0, 1.0, 5.0, 14.0);
const LearningConstants kNoNoise(1.0, 1.0, 0.0, 0.0, 0.0);

SystemConfig homogeneous(std::size_t n) {
    return SystemConfig{std::vector<ClientProfile>(n), uniform_routing(n), 1, std::nullopt};
}

SystemConfig random_config(std::mt19937_64& rng, std::size_t n, bool cs) {
    std::uniform_real_distribution<double> rate(0.3, 5.0);
    std::uniform_real_distribution<double> power(0.1, 3.0);
    SystemConfig c;
    for (std::size_t i = 0; i < n; ++i) {
        c.clients.push_back({rate(rng), rate(rng), rate(rng), power(rng), power(rng), power(rng)});
    }
    c.routing = uniform_routing(n);
    if (cs) {
        c.cs = CentralServer{rate(rng) * 3, power(rng)};
    }
    return c;
}

} // namespace

TEST_CASE("softmax routing") {
    std::vector<double> zero(3, 0.0);
    RoutingVector uniform = softmax_routing(zero);
    for (double v : uniform.values()) {
        CHECK(v == doctest::Approx(1.0 / 3.0));
    }
    std::vector<double> theta{0.3, -1.2, 2.0}, shifted{100.3, 98.8, 102.0};
    RoutingVector a = softmax_routing(theta), b = softmax_routing(shifted);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
    std::vector<double> extreme{0.0, -800.0};
    RoutingVector e = softmax_routing(extreme);
    CHECK(e[1] > 0.0);

    // h(theta) = p_1^2 through the chain rule.
    auto h = [](std::span<const double> t) {
        RoutingVector p = softmax_routing(t);
        return p[0] * p[0];
    };
    std::vector<double> grad_p{2.0 * a[0], 0.0, 0.0};
    auto pulled = softmax_pullback(a.values(), grad_p);
    auto fd = oracle::finite_difference_gradient(h, theta);
    CHECK(oracle::max_relative_error(pulled, fd, 1e-9) <= 1e-6);
}

TEST_CASE("objective gradients match finite differences") {
    std::mt19937_64 rng(2);
    for (bool cs : {false, true}) {
        for (BoundVariant bound : {BoundVariant::BoundedG, BoundVariant::UnboundedG}) {
            SystemConfig config = random_config(rng, 3, cs);
            std::vector<double> p{0.2, 0.5, 0.3};
            for (ObjectiveKind kind : {ObjectiveKind::MinRounds, ObjectiveKind::MaxThroughput, ObjectiveKind::MinTime,
                                       ObjectiveKind::MinEnergy, ObjectiveKind::JointTimeEnergy}) {
                ObjectiveSpec spec{kind, std::nullopt, 0.5, kTwoClient, cs ? Model::WithCS : Model::NoCS, bound, 3.0, 7.0};
                if (kind == ObjectiveKind::JointTimeEnergy) {
                    spec.rho = 0.3;
                }
                for (int m : {1, 4}) {
                    CAPTURE(to_string(kind));
                    CAPTURE(m);
                    ObjectiveValue v = evaluate_objective(config, p, m, spec);
                    auto fd = oracle::finite_difference_gradient(
                        [&](std::span<const double> q) { return evaluate_objective(config, q, m, spec, false).value; },
                        p);
                    CHECK(oracle::max_relative_error(v.gradient, fd, 1e-6 * std::abs(v.value)) <= 1e-5);
                }
            }
        }
    }
}

TEST_CASE("objective spec validation") {
    SystemConfig config = homogeneous(2);
    std::vector<double> p{0.5, 0.5};
    ObjectiveSpec joint{ObjectiveKind::JointTimeEnergy, std::nullopt, 1.0, kTwoClient};
    CHECK_THROWS_AS(evaluate_objective(config, p, 1, joint), std::invalid_argument);
    ObjectiveSpec time{ObjectiveKind::MinTime, 0.5, 1.0, kTwoClient};
    CHECK_THROWS_AS(evaluate_objective(config, p, 1, time), std::invalid_argument);
    ObjectiveSpec cs{ObjectiveKind::MinTime, std::nullopt, 1.0, kTwoClient, Model::WithCS};
    CHECK_THROWS_AS(evaluate_objective(config, p, 1, cs), ConfigError);
    OptimizerOptions none;
    none.budget = 0;
    CHECK_THROWS_AS(optimize_routing(config, ObjectiveSpec{}, 1, std::nullopt, none), std::invalid_argument);
    CHECK(parse_objective("joint") == ObjectiveKind::JointTimeEnergy);
    CHECK_THROWS_AS(parse_objective("fastest"), ConfigError);
}

TEST_CASE("max throughput on symmetric clients is uniform") {
    SystemConfig config = homogeneous(2);
    config.routing = RoutingVector({0.8, 0.2});
    ObjectiveSpec spec{ObjectiveKind::MaxThroughput, std::nullopt, 1.0, kTwoClient};
    OptimizationResult r = optimize_routing(config, spec, 2);
    CHECK(std::abs(r.p_star[0] - 0.5) <= 1e-4);
    CHECK(r.restarts_used == 5);
    const double direct = evaluate_objective(config, r.p_star.values(), 2, spec).value;
    CHECK(r.objective_value == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("min energy at m = 1 matches the closed form") {
    SystemConfig config = homogeneous(2);
    config.clients[0].p_c = 1.0;
    config.clients[1].p_c = 4.0;
    ObjectiveSpec spec{ObjectiveKind::MinEnergy, std::nullopt, 1.0, kTwoClient};
    OptimizationResult r = optimize_routing(config, spec, 1);
    CHECK(std::abs(r.p_star[0] - 2.0 / 3.0) <= 1e-3);
    const double closed = minimal_energy(EnergyProfile::from_config(config), kTwoClient, 1.0);
    CHECK(std::abs(r.objective_value - closed) <= 1e-6 * closed);
}

TEST_CASE("min rounds at m = 1 without noise is uniform") {
    std::mt19937_64 rng(6);
    SystemConfig config = random_config(rng, 4, false);
    config.routing = RoutingVector({0.1, 0.2, 0.3, 0.4});
    ObjectiveSpec spec{ObjectiveKind::MinRounds, std::nullopt, 1.0, kNoNoise};
    OptimizationResult r = optimize_routing(config, spec, 1);
    for (double v : r.p_star.values()) {
        CHECK(std::abs(v - 0.25) <= 1e-3);
    }
}

TEST_CASE("restart winners never get worse and p stays interior") {
    std::mt19937_64 rng(13);
    SystemConfig config = random_config(rng, 3, true);
    ObjectiveSpec spec{ObjectiveKind::MinTime, std::nullopt, 1.0, kTwoClient, Model::WithCS};
    OptimizerOptions opt;
    opt.budget = 300;
    opt.seed = 5;
    OptimizationResult r = optimize_routing(config, spec, 3, std::nullopt, opt);
    double running = INFINITY;
    int current = -1;
    double restart_best = INFINITY;
    for (const TracePoint& t : r.trace) {
        if (t.restart != current) {
            running = std::min(running, restart_best);
            restart_best = INFINITY;
            current = t.restart;
        }
        restart_best = std::min(restart_best, t.objective);
    }
    running = std::min(running, restart_best);
    CHECK(r.objective_value <= running + 1e-12);
    double sum = 0.0;
    for (double v : r.p_star.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-10);

    OptimizationResult again = optimize_routing(config, spec, 3, std::nullopt, opt);
    CHECK(again.p_star == r.p_star);
}

TEST_CASE("concurrency search") {
    SystemConfig config = homogeneous(2);
    OptimizerOptions opt;
    opt.budget = 400;
    opt.restarts = 2;

    ObjectiveSpec rounds{ObjectiveKind::MinRounds, std::nullopt, 1.0, kTwoClient};
    CHECK(search_concurrency(config, rounds, 1, 10, 2, opt).m_star == 1);

    SystemConfig powered = config;
    powered.clients[0].p_c = 1.0;
    powered.clients[1].p_c = 3.0;
    ObjectiveSpec energy{ObjectiveKind::MinEnergy, std::nullopt, 1.0, kTwoClient};
    CHECK(search_concurrency(powered, energy, 1, 10, 2, opt).m_star == 1);

    ObjectiveSpec time{ObjectiveKind::MinTime, std::nullopt, 1.0, kTwoClient};
    OptimizationResult r = search_concurrency(config, time, 1, 30, 2, opt);
    CHECK(r.m_star > 1);
    CHECK(r.m_star < 30);
    std::vector<double> half{0.5, 0.5};
    const double at = evaluate_objective(config, r.p_star.values(), r.m_star, time, false).value;
    CHECK(evaluate_objective(config, half, r.m_star - 1, time, false).value >= at - 1e-9);
    CHECK(evaluate_objective(config, half, r.m_star + 1, time, false).value >= at - 1e-9);
    CHECK(default_first_level(ObjectiveKind::MinTime) == 2);
    CHECK(default_first_level(ObjectiveKind::MinEnergy) == 1);
}

TEST_CASE("Pareto sweep endpoints and monotonicity") {
    std::mt19937_64 rng(4);
    SystemConfig config = random_config(rng, 2, false);
    OptimizerOptions opt;
    opt.budget = 600;
    opt.restarts = 2;
    std::vector<double> rhos;
    for (int k = 0; k <= 10; ++k) {
        rhos.push_back(k / 10.0);
    }
    ParetoFrontier f = pareto_sweep(config, rhos, 1.0, kTwoClient, 20, 2, opt);
    REQUIRE(f.points.size() == 11);
    CHECK(f.points.front().time_norm == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(f.points.back().energy_norm == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(f.points.back().m_star == 1);
    for (std::size_t k = 1; k < f.points.size(); ++k) {
        CHECK(f.points[k].energy <= f.points[k - 1].energy * (1 + 1e-3));
        CHECK(f.points[k].time >= f.points[k - 1].time * (1 - 1e-3));
    }
}
