#include "asyncfl/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace asyncfl {

namespace {

std::string header(const std::string& hash) {
    return "# manifest_hash=" + hash + "\n";
}

Json vector_json(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) {
        out.push_back(x);
    }
    return out;
}

} // namespace

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string manifest_hash(const RunManifest& manifest) {
    Json j = to_json(manifest);
    j.erase("timestamp");
    j.erase("output_dir");
    j.erase("manifest_hash");
    return fnv1a_hex(j.dump());
}

Json to_json(const RunManifest& manifest) {
    Json j;
    j["command"] = manifest.command;
    j["config_path"] = manifest.config_path;
    j["config_digest"] = manifest.config_digest;
    j["seeds"] = manifest.seeds;
    j["output_dir"] = manifest.output_dir;
    j["version"] = manifest.version;
    j["arguments"] = manifest.arguments;
    j["timestamp"] = manifest.timestamp ? Json(*manifest.timestamp) : Json(nullptr);
    return j;
}

std::optional<std::int64_t> reproducible_timestamp() {
    const char* env = std::getenv("SOURCE_DATE_EPOCH");
    if (env == nullptr) {
        return std::nullopt;
    }
    std::int64_t value = 0;
    const std::string_view text(env);
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

Json matrix_json(const Matrix& m) {
    Json out = Json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols; ++j) {
            row.push_back(m(i, j));
        }
        out.push_back(std::move(row));
    }
    return out;
}

Json to_json(const ComplexityReport& r) {
    Json j;
    j["model"] = to_string(r.model);
    j["bound"] = to_string(r.bound_variant);
    j["lambda"] = r.lambda;
    j["k_eps"] = r.k_eps;
    j["eta_max"] = r.eta_max;
    j["tau_eps"] = r.tau_eps;
    j["e_eps"] = r.e_eps;
    j["energy_per_round"] = r.energy_per_round;
    return j;
}

Json to_json(const SimStats& s) {
    Json j;
    j["seed"] = s.seed;
    j["warmup_discarded"] = s.warmup_discarded;
    j["rounds_completed"] = s.rounds_completed;
    j["sim_time"] = s.sim_time;
    j["empirical_throughput"] = s.empirical_throughput;
    j["throughput_se"] = s.throughput_se;
    j["empirical_delays"] = vector_json(s.empirical_delays);
    j["delay_se"] = vector_json(s.delay_se);
    j["per_client_update_fraction"] = vector_json(s.per_client_update_fraction);
    j["update_fraction_se"] = vector_json(s.update_fraction_se);
    j["energy_total"] = s.energy_total;
    j["energy_per_round"] = s.energy_per_round;
    j["energy_per_round_se"] = s.energy_per_round_se;
    return j;
}

Json to_json(const OptimizationResult& r) {
    Json j;
    j["p_star"] = r.p_star.vector();
    j["m_star"] = r.m_star;
    j["objective_value"] = r.objective_value;
    j["restarts_used"] = r.restarts_used;
    return j;
}

Json to_json(const ParetoFrontier& f) {
    Json j;
    j["tau_star"] = f.tau_star;
    j["energy_star"] = f.energy_star;
    Json points = Json::array();
    for (const ParetoPoint& p : f.points) {
        Json q;
        q["rho"] = p.rho;
        q["m_star"] = p.m_star;
        q["time"] = p.time;
        q["energy"] = p.energy;
        q["time_norm"] = p.time_norm;
        q["energy_norm"] = p.energy_norm;
        q["p_star"] = p.p_star.vector();
        points.push_back(std::move(q));
    }
    j["points"] = std::move(points);
    return j;
}

Json trajectory_summary(const Trajectory& t) {
    Json j;
    j["rounds"] = t.records.size();
    j["initial_loss"] = t.initial_loss;
    j["final_loss"] = t.records.empty() ? t.initial_loss : t.records.back().loss;
    j["final_grad_norm_sq"] = t.records.empty() ? t.initial_grad_norm_sq : t.records.back().grad_norm_sq;
    j["mean_grad_norm_sq"] = t.mean_grad_norm_sq();
    j["final_time"] = t.records.empty() ? 0.0 : t.records.back().t;
    j["final_energy"] = t.records.empty() ? 0.0 : t.records.back().energy;
    j["final_w"] = vector_json(t.final_w);
    return j;
}

Json analyze_report(const SystemConfig& config, const LearningConstants& consts, double eps, BoundVariant bound) {
    validate(config);
    const std::span<const double> p = config.routing.values();
    NetworkInputs net{config.clients, p, std::nullopt};
    if (config.cs) {
        net.mu_cs = config.cs->mu_cs;
    }
    const DelayReport d = delay_report(net, config.m);
    const ComplexityReport c = complexity_report(config, consts, eps, bound);

    Json j;
    j["model"] = to_string(net.model());
    j["n"] = config.n();
    j["m"] = config.m;
    j["eps"] = eps;
    j["routing"] = config.routing.vector();
    j["delays"] = vector_json(d.delays);
    j["jacobian"] = matrix_json(d.jacobian);
    j["lambda"] = c.lambda;
    j["k_eps"] = c.k_eps;
    j["eta_max"] = c.eta_max;
    j["tau_eps"] = c.tau_eps;
    j["e_eps"] = c.e_eps;
    j["energy_per_round"] = c.energy_per_round;
    j["bound"] = to_string(bound);
    return j;
}

std::string trace_csv(const std::vector<TraceEvent>& trace, const std::string& hash) {
    std::string out = header(hash) + "time,station,event,client,tasks_in_system\n";
    for (const TraceEvent& e : trace) {
        out += format_double(e.time);
        out += ',';
        out += to_string(e.station);
        out += ',';
        out += to_string(e.event);
        out += ',';
        out += std::to_string(e.client);
        out += ',';
        out += std::to_string(e.tasks_in_system);
        out += '\n';
    }
    return out;
}

std::string trajectory_csv(const Trajectory& t, const std::string& hash) {
    std::string out = header(hash) + "k,t,energy,loss,grad_norm_sq,client,staleness\n";
    out += "0,0,0," + format_double(t.initial_loss) + ',' + format_double(t.initial_grad_norm_sq) + ",,\n";
    for (const TrajectoryRecord& r : t.records) {
        out += std::to_string(r.k) + ',' + format_double(r.t) + ',' + format_double(r.energy) + ',' +
               format_double(r.loss) + ',' + format_double(r.grad_norm_sq) + ',' + std::to_string(r.client) + ',' +
               std::to_string(r.staleness) + '\n';
    }
    return out;
}

std::string pareto_csv(const ParetoFrontier& f, const std::string& hash) {
    std::string out = header(hash) + "rho,m_star,time,energy,time_norm,energy_norm,p_star\n";
    for (const ParetoPoint& p : f.points) {
        std::string routing;
        for (std::size_t i = 0; i < p.p_star.size(); ++i) {
            routing += (i ? ";" : "") + format_double(p.p_star[i]);
        }
        out += format_double(p.rho) + ',' + std::to_string(p.m_star) + ',' + format_double(p.time) + ',' +
               format_double(p.energy) + ',' + format_double(p.time_norm) + ',' + format_double(p.energy_norm) +
               ',' + routing + '\n';
    }
    return out;
}

std::string optimization_trace_csv(const OptimizationResult& r, const std::string& hash) {
    std::string out = header(hash) + "restart,iteration,objective\n";
    for (const TracePoint& t : r.trace) {
        out += std::to_string(t.restart) + ',' + std::to_string(t.iteration) + ',' + format_double(t.objective) + '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    f << content;
    if (!f) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

} // namespace asyncfl
