#include "asyncfl/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "asyncfl/kernels.hpp"
#include "asyncfl/learn.hpp"
#include "asyncfl/oracle.hpp"
#include "asyncfl/report.hpp"

#ifndef ASYNCFL_VERSION
#define ASYNCFL_VERSION "dev"
#endif

namespace asyncfl::cli {

namespace {

struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string model = "nocs";
    double eps = 0.1;
    std::string bound = "bounded";
    double delta = 1.0;
    double l_smooth = 1.0;
    double sigma = 1.0;
    double m_dissim = 5.0;
    double g_bound = 14.0;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
};

void add_common(CLI::App* app, Common& c, bool config_required = true) {
    auto* opt = app->add_option("--config", c.config_path, "system configuration (JSON)");
    if (config_required) {
        opt->required();
    }
    app->add_option("--seed", c.seed, "master seed")->capture_default_str();
    app->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    app->add_option("--model", c.model, "network model")->check(CLI::IsMember({"nocs", "cs"}))->capture_default_str();
    app->add_option("--eps", c.eps, "target accuracy")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--bound", c.bound, "gradient bound variant")
        ->check(CLI::IsMember({"bounded", "unbounded"}))
        ->capture_default_str();
    app->add_option("--delta", c.delta, "initial suboptimality")->capture_default_str();
    app->add_option("--lsmooth", c.l_smooth, "smoothness constant L")->capture_default_str();
    app->add_option("--sigma", c.sigma, "gradient noise")->capture_default_str();
    app->add_option("--mdissim", c.m_dissim, "gradient dissimilarity M")->capture_default_str();
    app->add_option("--gbound", c.g_bound, "gradient bound G")->capture_default_str();
}

LearningConstants constants(const Common& c) {
    return LearningConstants(c.delta, c.l_smooth, c.sigma, c.m_dissim, c.g_bound);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("cannot read config file " + path);
    }
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

SystemConfig load(const Common& c) {
    SystemConfig cfg = parse_system_config(read_file(c.config_path));
    const Model model = parse_model(c.model);
    require_model(cfg, model);
    if (model == Model::NoCS) {
        cfg.cs.reset();
    }
    return cfg;
}

Json common_arguments(const Common& c) {
    Json a;
    a["model"] = c.model;
    a["eps"] = c.eps;
    a["bound"] = c.bound;
    a["constants"] = {{"delta", c.delta}, {"L", c.l_smooth}, {"sigma", c.sigma}, {"M", c.m_dissim}, {"G", c.g_bound}};
    return a;
}

/// Writes manifest.json and returns its hash.
std::string write_manifest(const std::string& command, const Common& c, std::vector<std::uint64_t> seeds,
                           Json arguments) {
    RunManifest m;
    m.command = command;
    m.config_path = c.config_path;
    m.config_digest = c.config_path.empty() ? "" : fnv1a_hex(read_file(c.config_path));
    m.seeds = std::move(seeds);
    m.output_dir = c.out_dir;
    m.version = ASYNCFL_VERSION;
    m.arguments = std::move(arguments);
    m.timestamp = reproducible_timestamp();
    const std::string hash = manifest_hash(m);
    Json j = to_json(m);
    j["manifest_hash"] = hash;
    write_text(std::filesystem::path(c.out_dir) / "manifest.json", j.dump(2) + "\n");
    return hash;
}

void write_report(const Common& c, Json report, const std::string& hash) {
    Json j;
    j["manifest_hash"] = hash;
    for (auto& [key, value] : report.items()) {
        j[key] = value;
    }
    write_text(std::filesystem::path(c.out_dir) / "report.json", j.dump(2) + "\n");
}

int cmd_analyze(const Common& c, Context& ctx) {
    const SystemConfig cfg = load(c);
    Json report = analyze_report(cfg, constants(c), c.eps, parse_bound_variant(c.bound));
    const std::string hash = write_manifest("analyze", c, {c.seed}, common_arguments(c));
    ctx.out << "lambda " << format_double(report["lambda"].get<double>()) << "  k_eps "
            << format_double(report["k_eps"].get<double>()) << "  tau_eps "
            << format_double(report["tau_eps"].get<double>()) << "\n";
    write_report(c, std::move(report), hash);
    return kExitOk;
}

struct OptimizeArgs {
    std::string objective = "min-time";
    std::optional<double> rho;
    std::optional<int> m;
    std::optional<int> m_first;
    std::optional<int> m_last;
    int patience = 2;
    int restarts = 5;
    int budget = 2000;
};

OptimizerOptions optimizer_options(const Common& c, const OptimizeArgs& a) {
    OptimizerOptions o;
    o.seed = derive_seed(c.seed, 0);
    o.restarts = a.restarts;
    o.budget = a.budget;
    return o;
}

int cmd_optimize(const Common& c, const OptimizeArgs& a, Context& ctx) {
    const SystemConfig cfg = load(c);
    ObjectiveSpec spec;
    spec.kind = parse_objective(a.objective);
    spec.rho = a.rho;
    spec.eps = c.eps;
    spec.consts = constants(c);
    spec.model = cfg.cs ? Model::WithCS : Model::NoCS;
    spec.bound = parse_bound_variant(c.bound);
    if (spec.kind == ObjectiveKind::JointTimeEnergy) {
        // Normalizers from the single-objective optima.
        const ParetoFrontier ref = pareto_sweep(cfg, std::vector<double>{}, c.eps, spec.consts,
                                                a.m_last.value_or(cfg.m), a.patience, optimizer_options(c, a),
                                                spec.bound);
        spec.time_normalizer = ref.tau_star;
        spec.energy_normalizer = ref.energy_star;
    }
    spec.check();
    const OptimizerOptions opts = optimizer_options(c, a);
    OptimizationResult r;
    if (a.m) {
        r = optimize_routing(cfg, spec, *a.m, std::nullopt, opts);
    } else {
        const int first = a.m_first.value_or(default_first_level(spec.kind));
        r = search_concurrency(cfg, spec, first, a.m_last.value_or(cfg.m), a.patience, opts);
    }

    Json args = common_arguments(c);
    args["objective"] = a.objective;
    args["rho"] = a.rho ? Json(*a.rho) : Json(nullptr);
    args["m"] = a.m ? Json(*a.m) : Json(nullptr);
    args["m_first"] = a.m_first ? Json(*a.m_first) : Json(nullptr);
    args["m_last"] = a.m_last ? Json(*a.m_last) : Json(nullptr);
    args["patience"] = a.patience;
    args["restarts"] = a.restarts;
    args["budget"] = a.budget;
    const std::string hash = write_manifest("optimize", c, {c.seed}, args);

    SystemConfig best = cfg;
    best.routing = r.p_star;
    best.m = r.m_star;
    Json report = to_json(r);
    report["objective"] = a.objective;
    report["analysis"] = analyze_report(best, spec.consts, c.eps, spec.bound);
    write_report(c, std::move(report), hash);
    write_text(std::filesystem::path(c.out_dir) / "trace.csv", optimization_trace_csv(r, hash));
    ctx.out << "m* " << r.m_star << "  objective " << format_double(r.objective_value) << "\n";
    return kExitOk;
}

int cmd_pareto(const Common& c, const OptimizeArgs& a, const std::vector<double>& rho, Context& ctx) {
    const SystemConfig cfg = load(c);
    const ParetoFrontier f = pareto_sweep(cfg, rho, c.eps, constants(c), a.m_last.value_or(cfg.m), a.patience,
                                          optimizer_options(c, a), parse_bound_variant(c.bound));
    Json args = common_arguments(c);
    args["rho"] = rho;
    args["m_last"] = a.m_last ? Json(*a.m_last) : Json(nullptr);
    args["patience"] = a.patience;
    args["restarts"] = a.restarts;
    args["budget"] = a.budget;
    const std::string hash = write_manifest("pareto", c, {c.seed}, args);
    write_report(c, to_json(f), hash);
    write_text(std::filesystem::path(c.out_dir) / "trace.csv", pareto_csv(f, hash));
    ctx.out << f.points.size() << " frontier points\n";
    return kExitOk;
}

struct SimulateArgs {
    std::string law = "exponential";
    std::optional<std::uint64_t> rounds;
    std::optional<double> time_limit;
    std::optional<std::uint64_t> warmup;
    int batches = 100;
    bool no_trace = false;
};

int cmd_simulate(const Common& c, const SimulateArgs& a, Context& ctx) {
    const SystemConfig cfg = load(c);
    SimHorizon h;
    h.rounds = a.rounds;
    h.time_limit = a.time_limit;
    if (!h.rounds && !h.time_limit) {
        h.rounds = 20000;
    }
    SimOptions opts;
    opts.warmup = a.warmup;
    opts.batches = a.batches;
    opts.with_cs = cfg.cs.has_value();
    std::vector<TraceEvent> trace;
    if (!a.no_trace) {
        opts.trace = &trace;
    }
    const ServiceLaw law{parse_service_law(a.law)};
    const SimStats s = run_simulation(cfg, law, h, c.seed, opts);

    Json args = common_arguments(c);
    args["law"] = a.law;
    args["rounds"] = h.rounds ? Json(*h.rounds) : Json(nullptr);
    args["time_limit"] = h.time_limit ? Json(*h.time_limit) : Json(nullptr);
    args["warmup"] = s.warmup_discarded;
    args["batches"] = a.batches;
    const std::string hash = write_manifest("simulate", c, {c.seed}, args);

    Json report = to_json(s);
    report["model"] = c.model;
    report["law"] = a.law;
    report["analytic"] = analyze_report(cfg, constants(c), c.eps, parse_bound_variant(c.bound));
    write_report(c, std::move(report), hash);
    if (!a.no_trace) {
        write_text(std::filesystem::path(c.out_dir) / "trace.csv", trace_csv(trace, hash));
    }
    ctx.out << "rounds " << s.rounds_completed << "  throughput " << format_double(s.empirical_throughput)
            << " +- " << format_double(s.throughput_se) << "\n";
    return kExitOk;
}

struct LearnArgs {
    std::string law = "exponential";
    std::size_t dim = 10;
    double heterogeneity = 1.0;
    double noise = 0.1;
    std::uint64_t rounds = 5000;
    std::optional<double> eta;
    int samples = 256;
    double radius = 3.0;
    std::optional<double> threshold;
};

int cmd_learn(const Common& c, const LearnArgs& a, Context& ctx) {
    const SystemConfig cfg = load(c);
    const FederatedTask task = make_synthetic_task(cfg.n(), a.dim, a.heterogeneity, a.noise, derive_seed(c.seed, 0));
    const LearningConstants k = estimate_constants(task, a.samples, a.radius, derive_seed(c.seed, 1));
    const ComplexityReport bound = complexity_report(cfg, k, c.eps, parse_bound_variant(c.bound));
    const double eta = a.eta.value_or(bound.eta_max);
    LearnOptions opts;
    opts.with_cs = cfg.cs.has_value();
    opts.stop_below = a.threshold;
    const Trajectory t =
        run_generalized_async_sgd(task, cfg, ServiceLaw{parse_service_law(a.law)}, eta, a.rounds,
                                  derive_seed(c.seed, 2), opts);

    Json args = common_arguments(c);
    args["law"] = a.law;
    args["dim"] = a.dim;
    args["heterogeneity"] = a.heterogeneity;
    args["noise"] = a.noise;
    args["rounds"] = a.rounds;
    args["eta"] = a.eta ? Json(*a.eta) : Json(nullptr);
    args["samples"] = a.samples;
    args["radius"] = a.radius;
    args["threshold"] = a.threshold ? Json(*a.threshold) : Json(nullptr);
    const std::string hash = write_manifest("learn", c, {c.seed}, args);

    Json report = trajectory_summary(t);
    report["eta"] = eta;
    report["estimated_constants"] = {{"delta", k.delta()}, {"L", k.l_smooth()}, {"sigma", k.sigma()},
                                     {"M", k.m_dissim()}, {"G", k.g_bound()}};
    report["bound"] = to_json(bound);
    write_report(c, std::move(report), hash);
    write_text(std::filesystem::path(c.out_dir) / "trace.csv", trajectory_csv(t, hash));
    ctx.out << "rounds " << t.records.size() << "  final loss "
            << format_double(t.records.empty() ? t.initial_loss : t.records.back().loss) << "\n";
    return kExitOk;
}

SystemConfig random_instance(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::uniform_real_distribution<double> rate(0.5, 3.0);
    std::uniform_real_distribution<double> weight(0.2, 1.0);
    SystemConfig cfg;
    std::vector<double> p;
    for (int i = 0; i < 2; ++i) {
        cfg.clients.push_back({rate(rng), rate(rng), rate(rng), weight(rng), weight(rng), weight(rng)});
        p.push_back(weight(rng));
    }
    const double total = p[0] + p[1];
    for (double& v : p) {
        v /= total;
    }
    cfg.routing = RoutingVector(p);
    cfg.m = 4;
    cfg.cs = CentralServer{rate(rng), weight(rng)};
    return cfg;
}

int cmd_validate(const Common& c, Context& ctx) {
    SystemConfig cfg;
    if (c.config_path.empty()) {
        cfg = random_instance(c.seed);
    } else {
        cfg = parse_system_config(read_file(c.config_path));
        if (!cfg.cs) {
            cfg.cs = CentralServer{1.0, 0.0};
        }
    }
    const std::vector<oracle::SuiteResult> suites = oracle::run_oracle_suites(cfg);
    std::size_t passed = 0;
    Json results = Json::array();
    for (const oracle::SuiteResult& s : suites) {
        ctx.out << (s.passed ? "[pass] " : "[FAIL] ") << s.name << ": " << s.detail << "\n";
        passed += s.passed ? 1 : 0;
        results.push_back({{"name", s.name}, {"passed", s.passed}, {"detail", s.detail}});
    }
    Json args = common_arguments(c);
    args["instance"] = c.config_path.empty() ? "random" : "config";
    const std::string hash = write_manifest("validate", c, {c.seed}, args);
    Json report;
    report["config"] = Json::parse(to_json(cfg));
    report["suites"] = std::move(results);
    write_report(c, std::move(report), hash);
    if (passed == suites.size()) {
        ctx.out << "all " << suites.size() << " oracle suites passed\n";
        return kExitOk;
    }
    ctx.out << (suites.size() - passed) << " of " << suites.size() << " oracle suites failed\n";
    return kExitValidation;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Steady-state analysis, optimization and simulation of asynchronous federated learning"};
    app.set_version_flag("--version", ASYNCFL_VERSION);
    app.require_subcommand(1);
    std::string backend;
    app.add_option("--kernels", backend, "force a kernel backend")->check(CLI::IsMember({"scalar", "avx2", "neon"}));

    Common common;
    OptimizeArgs opt;
    std::vector<double> rho_list{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    SimulateArgs sim;
    LearnArgs learn;

    auto* analyze = app.add_subcommand("analyze", "closed-form delays, throughput and complexity");
    add_common(analyze, common);

    auto* optimize = app.add_subcommand("optimize", "optimize routing and concurrency");
    add_common(optimize, common);
    optimize->add_option("--objective", opt.objective, "objective")
        ->check(CLI::IsMember({"min-rounds", "max-throughput", "min-time", "min-energy", "joint"}))
        ->capture_default_str();
    optimize->add_option("--rho", opt.rho, "energy weight of the joint objective")->check(CLI::Range(0.0, 1.0));
    optimize->add_option("--m", opt.m, "fixed concurrency (skips the search)")->check(CLI::PositiveNumber);
    optimize->add_option("--m-first", opt.m_first, "first level of the search")->check(CLI::PositiveNumber);
    optimize->add_option("--m-last", opt.m_last, "last level of the search (default: config m)")
        ->check(CLI::PositiveNumber);
    optimize->add_option("--patience", opt.patience, "levels without improvement before stopping")
        ->capture_default_str();
    optimize->add_option("--restarts", opt.restarts, "Adam restarts")->capture_default_str();
    optimize->add_option("--budget", opt.budget, "Adam iterations per restart")->capture_default_str();

    auto* pareto = app.add_subcommand("pareto", "time/energy frontier over rho");
    add_common(pareto, common);
    pareto->add_option("--rho", rho_list, "comma-separated weights")->delimiter(',')->capture_default_str();
    pareto->add_option("--m-last", opt.m_last, "last concurrency level (default: config m)")
        ->check(CLI::PositiveNumber);
    pareto->add_option("--patience", opt.patience)->capture_default_str();
    pareto->add_option("--restarts", opt.restarts)->capture_default_str();
    pareto->add_option("--budget", opt.budget)->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "discrete-event simulation");
    add_common(simulate, common);
    simulate->add_option("--law", sim.law, "service-time law")
        ->check(CLI::IsMember({"exponential", "deterministic", "lognormal"}))
        ->capture_default_str();
    simulate->add_option("--rounds", sim.rounds, "measured rounds (default 20000)");
    simulate->add_option("--time-limit", sim.time_limit, "simulated time limit, warmup included")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--warmup", sim.warmup, "discarded rounds (default max(10 m, 1000))");
    simulate->add_option("--batches", sim.batches, "batch-means batches")->capture_default_str();
    simulate->add_flag("--no-trace", sim.no_trace, "skip trace.csv");

    auto* learn_cmd = app.add_subcommand("learn", "asynchronous SGD on a synthetic least-squares task");
    add_common(learn_cmd, common);
    learn_cmd->add_option("--law", learn.law)
        ->check(CLI::IsMember({"exponential", "deterministic", "lognormal"}))
        ->capture_default_str();
    learn_cmd->add_option("--dim", learn.dim, "parameter dimension")->check(CLI::PositiveNumber)
        ->capture_default_str();
    learn_cmd->add_option("--heterogeneity", learn.heterogeneity)->capture_default_str();
    learn_cmd->add_option("--noise", learn.noise, "gradient noise scale")->capture_default_str();
    learn_cmd->add_option("--rounds", learn.rounds)->capture_default_str();
    learn_cmd->add_option("--eta", learn.eta, "learning rate (default: the bound's eta_max)")
        ->check(CLI::PositiveNumber);
    learn_cmd->add_option("--samples", learn.samples, "points for the constant estimates")->capture_default_str();
    learn_cmd->add_option("--radius", learn.radius)->capture_default_str();
    learn_cmd->add_option("--threshold", learn.threshold, "stop once the loss reaches this value");

    auto* validate = app.add_subcommand("validate", "run the enumeration and finite-difference oracles");
    add_common(validate, common, false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
        reversed.pop_back();  // program name
    }
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Context ctx{out, err};
    try {
        if (!backend.empty()) {
            const kernels::Backend b = backend == "scalar" ? kernels::Backend::Scalar
                                       : backend == "avx2" ? kernels::Backend::Avx2
                                                           : kernels::Backend::Neon;
            if (!kernels::supported(b)) {
                err << "error: kernel backend " << backend << " is not available on this machine\n";
                return kExitUsage;
            }
            kernels::set_active_backend(b);
        }
        if (*analyze) {
            return cmd_analyze(common, ctx);
        }
        if (*optimize) {
            return cmd_optimize(common, opt, ctx);
        }
        if (*pareto) {
            return cmd_pareto(common, opt, rho_list, ctx);
        }
        if (*simulate) {
            return cmd_simulate(common, sim, ctx);
        }
        if (*learn_cmd) {
            return cmd_learn(common, learn, ctx);
        }
        return cmd_validate(common, ctx);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run(int argc, const char* const* argv) {
    return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

} // namespace asyncfl::cli
