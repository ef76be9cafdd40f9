#include "doctest.h"

#include <cstdlib>
#include <numeric>

#include "asyncfl/report.hpp"

using namespace asyncfl;

TEST_CASE("floats keep 17 significant digits") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-20) == "-2.4999999999999999e-20");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("manifest hash ignores only the timestamp") {
    RunManifest m;
    m.command = "simulate";
    m.config_path = "cfg.json";
    m.seeds = {7};
    m.version = "x";
    const std::string h = manifest_hash(m);
    m.timestamp = 1700000000;
    CHECK(manifest_hash(m) == h);
    m.output_dir = "elsewhere";
    CHECK(manifest_hash(m) == h);
    m.seeds = {8};
    CHECK(manifest_hash(m) != h);
    CHECK(to_json(m)["timestamp"] == 1700000000);
}

TEST_CASE("analyze report") {
    SystemConfig one{{ClientProfile{}}, RoutingVector({1.0}), 1, std::nullopt};
    Json r = analyze_report(one, LearningConstants(), 1.0, BoundVariant::BoundedG);
    CHECK(r["delays"][0].get<double>() == 0.0);
    CHECK(r["model"] == "nocs");

    SystemConfig three{{{1, 2, 3, 0, 1, 0}, {2, 1, 1, 0, 1, 0}, {3, 3, 0.5, 0, 1, 0}}, uniform_routing(3), 5,
                       CentralServer{2.0, 1.0}};
    r = analyze_report(three, LearningConstants(1, 1, 1, 5, 14), 0.5, BoundVariant::BoundedG);
    const auto d = r["delays"].get<std::vector<double>>();
    CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(r["model"] == "cs");
    CHECK(r["jacobian"].size() == 3);
    for (const char* key : {"lambda", "k_eps", "eta_max", "tau_eps", "e_eps", "energy_per_round"}) {
        CHECK(r.contains(key));
    }
}

TEST_CASE("csv tables") {
    std::vector<TraceEvent> trace{{0.0, StationKind::Downlink, EventKind::Dispatch, 1, 1},
                                  {0.25, StationKind::Compute, EventKind::ComputeDone, 0, 2}};
    const std::string csv = trace_csv(trace, "abc");
    CHECK(csv == "# manifest_hash=abc\ntime,station,event,client,tasks_in_system\n"
                 "0,downlink,dispatch,1,1\n0.25,compute,compute_done,0,2\n");

    Trajectory t;
    t.initial_loss = 2.0;
    t.initial_grad_norm_sq = 4.0;
    t.records.push_back({1, 0.5, 0.75, 1.0, 1.0, 0, 0});
    CHECK(trajectory_csv(t, "h") == "# manifest_hash=h\nk,t,energy,loss,grad_norm_sq,client,staleness\n"
                                    "0,0,0,2,4,,\n1,0.5,0.75,1,1,0,0\n");

    ParetoFrontier f;
    for (int k = 0; k <= 10; ++k) {
        f.points.push_back({k / 10.0, RoutingVector({0.5, 0.5}), 2, 1.0, 2.0, 1.0, 1.0});
    }
    const std::string p = pareto_csv(f, "h");
    CHECK(std::count(p.begin(), p.end(), '\n') == 13);
}
