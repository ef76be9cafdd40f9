#include "doctest.h"

#include <cmath>

#include "asyncfl/analysis.hpp"
#include "asyncfl/buzen.hpp"
#include "asyncfl/complexity.hpp"
#include "asyncfl/learn.hpp"

using namespace asyncfl;

namespace {

FederatedTask half_square(double w0) {
    return make_least_squares_task(1, {{1.0}}, {{0.0}}, {w0});
}

SystemConfig single_client() {
    SystemConfig c;
    c.clients = {ClientProfile{}};
    c.routing = RoutingVector({1.0});
    c.m = 1;
    return c;
}

SystemConfig two_clusters(int m) {
    SystemConfig c;
    c.clients = {{4.0, 4.0, 4.0, 0.1, 1.0, 0.1}, {4.0, 4.0, 4.0, 0.1, 1.0, 0.1},
                 {1.0, 0.5, 1.0, 0.1, 0.2, 0.1}, {1.0, 0.5, 1.0, 0.1, 0.2, 0.1}};
    c.routing = uniform_routing(4);
    c.m = m;
    return c;
}

} // namespace

TEST_CASE("serial gradient descent on one half square") {
    FederatedTask task = half_square(1.0);
    Trajectory tr = run_generalized_async_sgd(task, single_client(), ServiceLaw{}, 0.1, 50, 3);
    REQUIRE(tr.records.size() == 50);
    double w = 1.0;
    for (const TrajectoryRecord& r : tr.records) {
        w *= 0.9;
        CHECK(r.loss == doctest::Approx(0.5 * w * w).epsilon(1e-14));
        CHECK(r.staleness == 0);
        CHECK(r.client == 0);
    }
    CHECK(tr.final_w[0] == doctest::Approx(std::pow(0.9, 50)).epsilon(1e-13));
}

TEST_CASE("constants of the half square") {
    FederatedTask task = half_square(2.0);
    LearningConstants k = estimate_constants(task, 64, 2.0);
    CHECK(k.l_smooth() == doctest::Approx(1.0));
    CHECK(k.delta() == doctest::Approx(2.0));
    CHECK(k.g_bound() == doctest::Approx(2.0));
    CHECK(k.m_dissim() == 0.0);
    CHECK(k.sigma() == 0.0);
}

TEST_CASE("synthetic tasks") {
    FederatedTask a = make_synthetic_task(4, 5, 0.5, 0.1, 9);
    FederatedTask b = make_synthetic_task(4, 5, 0.5, 0.1, 9);
    CHECK(a.w0 == b.w0);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.clients[i].target == b.clients[i].target);
        CHECK(a.clients[i].hessian == b.clients[i].hessian);
    }
    const std::vector<double> wstar = a.minimizer();
    for (double g : a.gradient(wstar)) {
        CHECK(std::abs(g) < 1e-9);
    }
    CHECK(std::sqrt(a.w0[0] * a.w0[0] + a.w0[1] * a.w0[1] + a.w0[2] * a.w0[2] + a.w0[3] * a.w0[3] +
                    a.w0[4] * a.w0[4]) == doctest::Approx(1.0));

    LearningConstants flat = estimate_constants(make_synthetic_task(3, 4, 0.0, 0.0, 1), 32, 1.0);
    CHECK(flat.m_dissim() < 1e-12);
    CHECK(flat.sigma() == 0.0);
    CHECK(flat.b() < 1e-20);
    CHECK(flat.c() == doctest::Approx(6.0 * flat.g_bound() * flat.g_bound()));

    double previous = -1.0;
    for (double h : {0.0, 0.25, 0.5, 1.0, 2.0}) {
        const double m = estimate_constants(make_synthetic_task(3, 4, h, 0.0, 1), 32, 1.0).m_dissim();
        CHECK(m >= previous);
        previous = m;
    }
    CHECK_THROWS_AS(make_synthetic_task(0, 3, 0.1, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(estimate_constants(a, 0, 1.0), std::invalid_argument);
}

TEST_CASE("update fractions follow the routing vector") {
    SystemConfig c = two_clusters(4);
    c.routing = RoutingVector({0.4, 0.3, 0.2, 0.1});
    FederatedTask task = make_synthetic_task(4, 3, 0.3, 0.0, 2);
    const std::uint64_t k = 100000;
    Trajectory tr = run_generalized_async_sgd(task, c, ServiceLaw{}, 0.01, k, 5);
    std::vector<double> counts(4, 0.0);
    for (const TrajectoryRecord& r : tr.records) {
        counts[r.client] += 1.0;
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const double f = counts[i] / static_cast<double>(k);
        const double se = std::sqrt(c.routing[i] * (1.0 - c.routing[i]) / static_cast<double>(k));
        CHECK(std::abs(f - c.routing[i]) < 3.0 * se);
    }
    for (std::size_t j = 1; j < tr.records.size(); ++j) {
        CHECK(tr.records[j].t >= tr.records[j - 1].t);
        CHECK(tr.records[j].energy >= tr.records[j - 1].energy);
    }
}

TEST_CASE("bound-respecting run reaches the target accuracy") {
    SystemConfig c = two_clusters(3);
    FederatedTask task = make_synthetic_task(4, 3, 0.5, 0.2, 4);
    LearningConstants k = estimate_constants(task, 200, 3.0);
    const double eps = 0.5;
    const auto p = c.routing.values();
    const std::vector<double> d = expected_delays(normalization_constants(c.clients, p, c.m), c.clients, p, c.m);
    const double eta = max_learning_rate(p, c.m, d, k, eps);
    const double rounds = std::ceil(round_complexity(p, c.m, d, k, eps));
    REQUIRE(rounds < 5e6);
    Trajectory tr = run_generalized_async_sgd(task, c, ServiceLaw{}, eta, static_cast<std::uint64_t>(rounds), 8);
    CHECK(tr.mean_grad_norm_sq() < eps);
}

TEST_CASE("determinism and failure modes") {
    SystemConfig c = two_clusters(2);
    FederatedTask task = make_synthetic_task(4, 3, 0.5, 0.5, 6);
    Trajectory a = run_generalized_async_sgd(task, c, ServiceLaw{ServiceLaw::Kind::Lognormal}, 0.05, 2000, 77);
    Trajectory b = run_generalized_async_sgd(task, c, ServiceLaw{ServiceLaw::Kind::Lognormal}, 0.05, 2000, 77);
    CHECK(a == b);

    CHECK_THROWS_AS(run_generalized_async_sgd(task, c, ServiceLaw{}, 50.0, 2000, 1), DivergenceError);
    CHECK_THROWS_AS(run_generalized_async_sgd(task, c, ServiceLaw{}, 0.0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_generalized_async_sgd(task, single_client(), ServiceLaw{}, 0.1, 10, 1),
                    std::invalid_argument);

    LearnOptions stop;
    stop.stop_below = 0.5 * a.initial_loss;
    Trajectory early = run_generalized_async_sgd(task, c, ServiceLaw{}, 0.05, 100000, 1, stop);
    REQUIRE(first_below(early, stop.stop_below.value()));
    CHECK(early.records.back().loss <= *stop.stop_below);
    CHECK(learning_rate_grid(0.4) == std::vector<double>{0.4, 0.2, 0.1});
}
