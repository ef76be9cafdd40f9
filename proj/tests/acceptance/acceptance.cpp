// Acceptance runner: one line per criterion, non-zero exit if any fails.
// Usage: asyncfl_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asyncfl/analysis.hpp"
#include "asyncfl/buzen.hpp"
#include "asyncfl/cli.hpp"
#include "asyncfl/complexity.hpp"
#include "asyncfl/learn.hpp"
#include "asyncfl/optimize.hpp"
#include "asyncfl/oracle.hpp"
#include "asyncfl/report.hpp"
#include "asyncfl/simulate.hpp"

using namespace asyncfl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double x, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::vector<double> dirichlet(std::size_t n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(n);
    double s = 0.0;
    for (double& v : p) {
        v = e(rng) + 1e-3;
        s += v;
    }
    for (double& v : p) {
        v /= s;
    }
    return p;
}

SystemConfig random_instance(std::mt19937_64& rng, std::size_t n, int m, double lo = 0.1, double hi = 10.0) {
    std::uniform_real_distribution<double> rate(lo, hi);
    std::uniform_real_distribution<double> power(0.1, 3.0);
    SystemConfig c;
    for (std::size_t i = 0; i < n; ++i) {
        c.clients.push_back({rate(rng), rate(rng), rate(rng), power(rng), power(rng), power(rng)});
    }
    c.routing = RoutingVector(dirichlet(n, rng));
    c.m = m;
    c.cs = CentralServer{rate(rng), power(rng)};
    return c;
}

NetworkInputs inputs(const SystemConfig& c, std::span<const double> p, bool cs) {
    return NetworkInputs{c.clients, p, cs ? std::optional<double>(c.cs->mu_cs) : std::nullopt};
}

std::vector<double> closed_delays(const SystemConfig& c, std::span<const double> p, int m, bool cs) {
    const NetworkInputs net = inputs(c, p, cs);
    return delays(normalization_constants(net.model(), c.clients, p, m, net.mu_cs), net, m);
}

double closed_throughput(const SystemConfig& c, std::span<const double> p, int m, bool cs) {
    const NetworkInputs net = inputs(c, p, cs);
    return throughput(normalization_constants(net.model(), c.clients, p, m, net.mu_cs));
}

// 1. Buzen against direct summation.
Outcome buzen_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> pick_n(1, 3), pick_m(1, 5);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const SystemConfig c = random_instance(rng, pick_n(rng), pick_m(rng));
        const auto p = c.routing.values();
        const NormalizationTable z = normalization_constants(c.clients, p, c.m);
        const NormalizationTable w = normalization_constants_with_cs(c.clients, p, c.m, c.cs->mu_cs);
        for (int k = 0; k <= c.m; ++k) {
            const double bz = brute_force_constant(c.clients, p, k);
            const double bw = brute_force_constant(c.clients, p, k, c.cs->mu_cs);
            worst = std::max({worst, std::abs(z.value(k) - bz) / bz, std::abs(w.value(k) - bw) / bw});
        }
    }
    return {worst <= 1e-10, "50 instances, max relative error " + num(worst)};
}

// 2. Total delay is m - 1.
Outcome delay_conservation() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> pick_n(1, 20), pick_m(1, 50);
    double worst = 0.0;
    for (bool cs : {false, true}) {
        for (int t = 0; t < 100; ++t) {
            const SystemConfig c = random_instance(rng, pick_n(rng), pick_m(rng));
            const std::vector<double> d = closed_delays(c, c.routing.values(), c.m, cs);
            const double total = std::accumulate(d.begin(), d.end(), 0.0);
            worst = std::max(worst, std::abs(total - (c.m - 1)));
        }
    }
    return {worst <= 1e-9, "200 instances (both models), max |sum - (m-1)| " + num(worst)};
}

// 3. Jacobians and the throughput gradient against central differences.
Outcome gradient_fidelity() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> pick_m(1, 10);
    double jac_err = 0.0, grad_err = 0.0, euler_err = 0.0;
    for (int t = 0; t < 20; ++t) {
        const SystemConfig c = random_instance(rng, 3, pick_m(rng));
        const std::vector<double> p = c.routing.vector();
        for (bool cs : {false, true}) {
            const NetworkInputs net = inputs(c, p, cs);
            const NormalizationTable table = normalization_constants(net.model(), c.clients, p, c.m, net.mu_cs);
            const Matrix jac = cs ? delay_jacobian_cs(table, c.clients, p, c.m, c.cs->mu_cs)
                                  : delay_jacobian(table, c.clients, p, c.m);
            const Matrix fd = oracle::finite_difference_jacobian(
                [&](std::span<const double> q) { return closed_delays(c, q, c.m, cs); }, p, 1e-6);
            // Entrywise; the floor only matters for the identically zero m = 1 case.
            for (std::size_t k = 0; k < fd.data.size(); ++k) {
                jac_err = std::max(jac_err, std::abs(jac.data[k] - fd.data[k]) / std::max(std::abs(fd.data[k]), 1e-12));
            }
            const double lambda = throughput(table);
            const std::vector<double> g = throughput_gradient(table, net, c.m);
            const std::vector<double> gfd = oracle::finite_difference_gradient(
                [&](std::span<const double> q) { return closed_throughput(c, q, c.m, cs); }, p, 1e-6);
            double euler = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                grad_err = std::max(grad_err, std::abs(g[j] - gfd[j]) /
                                                  std::max(std::abs(gfd[j]), 1e-12));
                euler += p[j] * g[j];
            }
            euler_err = std::max(euler_err, std::abs(euler + lambda) / lambda);
        }
    }
    const bool pass = jac_err <= 1e-5 && grad_err <= 1e-5 && euler_err <= 1e-8;
    return {pass, "20 instances x 2 models: Jacobian " + num(jac_err) + ", throughput gradient " + num(grad_err) +
                      ", Euler identity " + num(euler_err)};
}

// 4. Simulation against the closed forms.
Outcome monte_carlo() {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> pick_n(2, 5), pick_m(2, 6);
    int checks = 0, misses = 0;
    double worst_z = 0.0;
    for (int t = 0; t < 5; ++t) {
        const SystemConfig c = random_instance(rng, pick_n(rng), pick_m(rng), 0.5, 5.0);
        for (bool cs : {false, true}) {
            SimOptions opts;
            opts.with_cs = cs;
            SimHorizon h;
            h.rounds = 200000;
            const SimStats s = run_simulation(c, ServiceLaw{}, h, 1000 + t, opts);
            const auto p = c.routing.values();
            const std::vector<double> d = closed_delays(c, p, c.m, cs);
            auto check = [&](double got, double want, double se) {
                const double z = std::abs(got - want) / std::max(se, 1e-12);
                worst_z = std::max(worst_z, z);
                ++checks;
                misses += z > 3.0 ? 1 : 0;
            };
            check(s.empirical_throughput, closed_throughput(c, p, c.m, cs), s.throughput_se);
            for (std::size_t i = 0; i < c.n(); ++i) {
                check(s.empirical_delays[i], d[i], s.delay_se[i]);
            }
        }
    }
    return {misses == 0, std::to_string(checks) + " comparisons over 10 runs of 2e5 rounds, " +
                             std::to_string(misses) + " outside 3 SE, worst " + num(worst_z) + " SE"};
}

// 5. Fast central server reduces to the plain network.
Outcome cs_limit() {
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<int> pick_n(1, 6), pick_m(1, 30);
    double worst = 0.0;
    for (int t = 0; t < 30; ++t) {
        SystemConfig c = random_instance(rng, pick_n(rng), pick_m(rng));
        c.cs->mu_cs = 1e6;
        const auto p = c.routing.values();
        const std::vector<double> w = closed_delays(c, p, c.m, true);
        const std::vector<double> z = closed_delays(c, p, c.m, false);
        for (std::size_t i = 0; i < w.size(); ++i) {
            worst = std::max(worst, std::abs(w[i] - z[i]) / std::max(std::abs(z[i]), 1e-9));
        }
        const double lw = closed_throughput(c, p, c.m, true);
        const double lz = closed_throughput(c, p, c.m, false);
        worst = std::max(worst, std::abs(lw - lz) / lz);
    }
    return {worst <= 1e-4, "30 instances at mu_cs = 1e6, max relative error " + num(worst)};
}

// 6. Energy per round: closed form and independence of m.
Outcome energy_closed_form() {
    std::mt19937_64 rng(606);
    int misses = 0, checks = 0;
    double worst_z = 0.0;
    for (bool cs : {false, true}) {
        const SystemConfig base = random_instance(rng, 3, 2, 0.5, 5.0);
        EnergyProfile profile = EnergyProfile::from_config(base);
        if (!cs) {
            profile.cs_cost = 0.0;
        }
        const double want = energy_per_round(base.routing.values(), profile);
        std::vector<SimStats> runs;
        for (int m : {2, 5, 10}) {
            SystemConfig c = base;
            c.m = m;
            SimOptions opts;
            opts.with_cs = cs;
            SimHorizon h;
            h.rounds = 200000;
            runs.push_back(run_simulation(c, ServiceLaw{}, h, 60 + m, opts));
            const double z = std::abs(runs.back().energy_per_round - want) / runs.back().energy_per_round_se;
            worst_z = std::max(worst_z, z);
            ++checks;
            misses += z > 3.0 ? 1 : 0;
        }
        for (std::size_t a = 0; a < runs.size(); ++a) {
            for (std::size_t b = a + 1; b < runs.size(); ++b) {
                const double se = std::hypot(runs[a].energy_per_round_se, runs[b].energy_per_round_se);
                const double z = std::abs(runs[a].energy_per_round - runs[b].energy_per_round) / se;
                worst_z = std::max(worst_z, z);
                ++checks;
                misses += z > 3.0 ? 1 : 0;
            }
        }
    }
    return {misses == 0, std::to_string(checks) + " comparisons (m in {2,5,10}, both models), " +
                             std::to_string(misses) + " outside 3 SE, worst " + num(worst_z) + " SE"};
}

// 7. MinEnergy at m = 1 recovers the closed-form routing and value.
Outcome energy_routing() {
    std::mt19937_64 rng(707);
    const LearningConstants k(1.0, 1.0, 1.0, 5.0, 14.0);
    double p_err = 0.0, v_err = 0.0;
    for (int t = 0; t < 10; ++t) {
        SystemConfig c = random_instance(rng, 2 + t % 4, 1);
        c.cs.reset();
        c.routing = uniform_routing(c.n());
        const EnergyProfile profile = EnergyProfile::from_config(c);
        ObjectiveSpec spec{ObjectiveKind::MinEnergy, std::nullopt, 0.5, k};
        OptimizerOptions opts;
        opts.seed = t;
        const OptimizationResult r = optimize_routing(c, spec, 1, std::nullopt, opts);
        const RoutingVector star = energy_optimal_routing(profile);
        for (std::size_t i = 0; i < c.n(); ++i) {
            p_err = std::max(p_err, std::abs(r.p_star[i] - star[i]));
        }
        const double e_star = minimal_energy(profile, k, 0.5);
        v_err = std::max(v_err, std::abs(r.objective_value - e_star) / e_star);
    }
    return {p_err <= 1e-3 && v_err <= 1e-6,
            "10 profiles: routing inf-norm error " + num(p_err) + ", objective relative error " + num(v_err)};
}

// 8. Two-client regime: time is non-monotone in m, rounds are not.
Outcome concurrency_structure() {
    SystemConfig c{std::vector<ClientProfile>(2), uniform_routing(2), 1, std::nullopt};
    const LearningConstants k(1.0, 1.0, 1.0, 5.0, 14.0);
    const double eps = 1.0;
    ObjectiveSpec spec{ObjectiveKind::MinTime, std::nullopt, eps, k};
    OptimizerOptions opts;
    opts.restarts = 3;
    opts.budget = 1000;
    std::vector<double> tau;
    std::vector<double> k_fixed;
    std::optional<std::vector<double>> warm;
    for (int m = 1; m <= 30; ++m) {
        const OptimizationResult r = optimize_routing(c, spec, m, warm, opts);
        warm = r.p_star.vector();
        tau.push_back(r.objective_value);
        const auto p = c.routing.values();
        const std::vector<double> d = closed_delays(c, p, m, false);
        k_fixed.push_back(round_complexity(p, m, d, k, eps));
    }
    const int best = static_cast<int>(std::min_element(tau.begin(), tau.end()) - tau.begin()) + 1;
    bool rounds_monotone = true;
    for (std::size_t i = 1; i < k_fixed.size(); ++i) {
        rounds_monotone = rounds_monotone && k_fixed[i] >= k_fixed[i - 1] * (1.0 - 1e-12);
    }
    const bool interior = best > 1 && best < 30;
    return {interior && rounds_monotone, "time minimized at m = " + std::to_string(best) + " of 1..30 (tau(1) = " +
                                             num(tau.front()) + ", tau(m*) = " + num(tau[best - 1]) +
                                             ", tau(30) = " + num(tau.back()) + "); K at uniform p " +
                                             (rounds_monotone ? "non-decreasing" : "NOT monotone")};
}

// 9. Learning trade-offs on a fast/slow two-cluster task.
Outcome learning_tradeoffs() {
    const int n = 10;
    const std::size_t dim = 10;
    const double heterogeneity = 1.0, noise = 0.1, eps = 1.0;
    SystemConfig cfg;
    for (int i = 0; i < n; ++i) {
        cfg.clients.push_back(i < n / 2 ? ClientProfile{4.0, 4.0, 4.0, 0.2, 2.0, 0.2}
                                        : ClientProfile{1.0, 0.4, 1.0, 0.1, 0.3, 0.1});
    }
    cfg.routing = uniform_routing(n);
    cfg.m = n;
    OptimizerOptions opts;
    opts.restarts = 2;
    opts.budget = 500;

    const double inf = std::numeric_limits<double>::infinity();
    // Per strategy, per seed: best over the step-size grid of each metric.
    enum { Uniform, MinTime, Joint, MinRounds, kStrategies };
    std::vector<std::vector<double>> time(kStrategies), energy(kStrategies), rounds(kStrategies);
    for (int seed = 1; seed <= 10; ++seed) {
        const FederatedTask task = make_synthetic_task(n, dim, heterogeneity, noise, derive_seed(seed, 100));
        const std::vector<double> w_star = task.minimizer();
        const double f_star = task.loss(w_star);
        const double w_norm = std::sqrt(std::inner_product(w_star.begin(), w_star.end(), w_star.begin(), 0.0));
        const double radius = 2.0 * w_norm + 1.0;
        const LearningConstants k = estimate_constants(task, 256, radius, seed);
        const double threshold = f_star + 0.05 * k.delta();

        ObjectiveSpec time_spec{ObjectiveKind::MinTime, std::nullopt, eps, k};
        const OptimizationResult t_opt = search_concurrency(cfg, time_spec, 2, 3 * n, 2, opts);
        const ParetoFrontier joint = pareto_sweep(cfg, std::vector<double>{0.1}, eps, k, 3 * n, 2, opts);
        ObjectiveSpec rounds_spec{ObjectiveKind::MinRounds, std::nullopt, eps, k};
        const OptimizationResult r_opt = optimize_routing(cfg, rounds_spec, n, std::nullopt, opts);

        const std::vector<std::pair<RoutingVector, int>> setups{{cfg.routing, n},
                                                               {t_opt.p_star, t_opt.m_star},
                                                               {joint.points[0].p_star, joint.points[0].m_star},
                                                               {r_opt.p_star, n}};
        for (int s = 0; s < kStrategies; ++s) {
            SystemConfig c = cfg;
            c.routing = setups[s].first;
            c.m = setups[s].second;
            const auto p = c.routing.values();
            const double eta_max = max_learning_rate(p, c.m, closed_delays(c, p, c.m, false), k, eps);
            double bt = inf, be = inf, bk = inf;
            for (double eta : learning_rate_grid(eta_max)) {
                LearnOptions lo;
                lo.stop_below = threshold;
                try {
                    const Trajectory tr = run_generalized_async_sgd(task, c, ServiceLaw{}, eta, 400000, seed, lo);
                    if (auto hit = first_below(tr, threshold)) {
                        bt = std::min(bt, hit->t);
                        be = std::min(be, hit->energy);
                        bk = std::min(bk, static_cast<double>(hit->k));
                    }
                } catch (const DivergenceError&) {
                }
            }
            time[s].push_back(bt);
            energy[s].push_back(be);
            rounds[s].push_back(bk);
        }
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
    };
    const double tu = median(time[Uniform]), tt = median(time[MinTime]), tr = median(time[MinRounds]);
    const double eu = median(energy[Uniform]), ej = median(energy[Joint]);
    const double ku = median(rounds[Uniform]), kr = median(rounds[MinRounds]);
    const bool a = tt < tu, b = ej < eu, c = ku > kr && tu < tr;
    return {a && b && c, "median time MinTime " + num(tt) + " vs uniform " + num(tu) + "; energy joint " + num(ej) +
                             " vs uniform " + num(eu) + "; updates uniform " + num(ku) + " vs MinRounds " +
                             num(kr) + " with time " + num(tu) + " vs " + num(tr)};
}

// 10. Repeated CLI runs are byte-identical.
Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "asyncfl_acceptance_determinism";
    fs::remove_all(root);
    const std::string config = (fs::path(ASYNCFL_CONFIG_DIR) / "four_client_cs.json").string();
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream os;
        os << f.rdbuf();
        return os.str();
    };
    int compared = 0;
    bool same = true;
    for (const std::string command : {"simulate", "learn"}) {
        for (const std::string law : {"exponential", "lognormal"}) {
            std::vector<fs::path> dirs{root / (command + law + "_a"), root / (command + law + "_b")};
            for (const fs::path& d : dirs) {
                std::ostringstream out, err;
                const int code = cli::run({"asyncfl", command, "--config", config, "--model", "cs", "--seed", "7",
                                           "--law", law, "--rounds", "5000", "--out", d.string()},
                                          out, err);
                if (code != 0) {
                    return {false, command + " failed: " + err.str()};
                }
            }
            for (const char* file : {"report.json", "trace.csv"}) {
                same = same && slurp(dirs[0] / file) == slurp(dirs[1] / file);
                ++compared;
            }
            const Json m0 = Json::parse(slurp(dirs[0] / "manifest.json"));
            const Json m1 = Json::parse(slurp(dirs[1] / "manifest.json"));
            same = same && m0["manifest_hash"] == m1["manifest_hash"];
            ++compared;
        }
    }
    fs::remove_all(root);
    return {same, std::to_string(compared) + " output pairs compared, " + (same ? "all identical" : "DIFFERENCES")};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "normalization constants vs brute force", buzen_oracle},
        {2, "delay conservation", delay_conservation},
        {3, "gradient fidelity", gradient_fidelity},
        {4, "Monte-Carlo agreement", monte_carlo},
        {5, "central-server limit", cs_limit},
        {6, "energy per round", energy_closed_form},
        {7, "energy-optimal routing", energy_routing},
        {8, "concurrency structure", concurrency_structure},
        {9, "learning trade-offs", learning_tradeoffs},
        {10, "determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
