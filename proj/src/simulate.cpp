#include "asyncfl/simulate.hpp"

#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

namespace asyncfl {

namespace {

// Tie-break order for simultaneous events.
int priority(StationKind kind) {
    return static_cast<int>(kind);
}

struct Event {
    double time;
    int prio;
    std::size_t station;
    std::uint64_t seq;
    EventKind kind;
    SimTask task;

    bool operator>(const Event& other) const {
        return std::tie(time, prio, station, seq) > std::tie(other.time, other.prio, other.station, other.seq);
    }
};

double sample_mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) {
        s += x;
    }
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Standard error of the mean of batch values.
double standard_error(const std::vector<double>& xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    const double mean = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

} // namespace

double ServiceLaw::sample(double mean, std::mt19937_64& rng) const {
    switch (kind) {
    case Kind::Exponential:
        return std::exponential_distribution<double>(1.0 / mean)(rng);
    case Kind::Deterministic:
        return mean;
    case Kind::Lognormal:
        // E[exp(N(mu, 1))] = exp(mu + 1/2)
        return std::lognormal_distribution<double>(std::log(mean) - 0.5, 1.0)(rng);
    }
    return mean;
}

std::string_view to_string(ServiceLaw::Kind kind) {
    switch (kind) {
    case ServiceLaw::Kind::Exponential:
        return "exponential";
    case ServiceLaw::Kind::Deterministic:
        return "deterministic";
    case ServiceLaw::Kind::Lognormal:
        return "lognormal";
    }
    return "unknown";
}

ServiceLaw::Kind parse_service_law(std::string_view text) {
    for (auto k : {ServiceLaw::Kind::Exponential, ServiceLaw::Kind::Deterministic, ServiceLaw::Kind::Lognormal}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown service law \"" + std::string(text) +
                      "\" (expected exponential, deterministic or lognormal)");
}

std::string_view to_string(StationKind kind) {
    switch (kind) {
    case StationKind::CentralServer:
        return "cs";
    case StationKind::Downlink:
        return "downlink";
    case StationKind::Compute:
        return "compute";
    case StationKind::Uplink:
        return "uplink";
    }
    return "unknown";
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::Dispatch:
        return "dispatch";
    case EventKind::DownlinkDone:
        return "downlink_done";
    case EventKind::ComputeDone:
        return "compute_done";
    case EventKind::UplinkDone:
        return "uplink_done";
    case EventKind::CentralServerDone:
        return "cs_done";
    }
    return "unknown";
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k) {
    std::uint64_t z = master + (k + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t default_warmup(int m) {
    return std::max<std::uint64_t>(10ULL * static_cast<std::uint64_t>(m), 1000ULL);
}

struct NetworkSimulator::Impl {
    SystemConfig config;
    ServiceLaw law;
    bool with_cs;
    std::size_t n;

    // Streams: 3i downlink, 3i+1 compute, 3i+2 uplink, then CS, routing, placement.
    std::vector<std::mt19937_64> streams;
    std::discrete_distribution<std::size_t> routing;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::uint64_t seq = 0;
    std::uint64_t next_task = 0;

    std::vector<int> downlink;
    std::vector<std::deque<SimTask>> compute;
    std::vector<int> uplink;
    std::deque<SimTask> cs_queue;

    double time = 0.0;
    double energy = 0.0;
    double power = 0.0;
    std::uint64_t rounds = 0;
    std::vector<SimTask> initial;
    std::function<void(const TraceEvent&)> trace;

    Impl(const SystemConfig& cfg, ServiceLaw l, std::uint64_t seed, bool cs)
        : config(cfg), law(l), with_cs(cs), n(cfg.n()), downlink(n, 0), compute(n), uplink(n, 0) {
        validate(config);
        if (with_cs && !config.cs) {
            throw ConfigError("central-server simulation needs a \"cs\" block in the config");
        }
        for (std::size_t k = 0; k < 3 * n + 3; ++k) {
            streams.emplace_back(derive_seed(seed, k));
        }
        const std::vector<double>& p = config.routing.vector();
        routing = std::discrete_distribution<std::size_t>(p.begin(), p.end());

        std::uniform_int_distribution<std::size_t> placement(0, n - 1);
        for (int k = 0; k < config.m; ++k) {
            const std::size_t client = placement(streams[3 * n + 2]);
            initial.push_back(SimTask{next_task++, client, 0});
        }
        for (const SimTask& task : initial) {
            enter_downlink(task);  // no callback yet; replayed by set_trace_callback
        }
    }

    std::mt19937_64& stream(StationKind kind, std::size_t client) {
        switch (kind) {
        case StationKind::Downlink:
            return streams[3 * client];
        case StationKind::Compute:
            return streams[3 * client + 1];
        case StationKind::Uplink:
            return streams[3 * client + 2];
        case StationKind::CentralServer:
            break;
        }
        return streams[3 * n];
    }

    void schedule(StationKind station, EventKind kind, double mean, const SimTask& task) {
        const double duration = law.sample(mean, stream(station, task.client));
        events.push(Event{time + duration, priority(station), task.client, seq++, kind, task});
    }

    void recompute_power() {
        double p = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const ClientProfile& c = config.clients[i];
            p += c.p_d * downlink[i] + c.p_u * uplink[i] + (compute[i].empty() ? 0.0 : c.p_c);
        }
        if (with_cs && !cs_queue.empty()) {
            p += config.cs->p_cs;
        }
        power = p;
    }

    int in_system() const {
        int total = static_cast<int>(cs_queue.size());
        for (std::size_t i = 0; i < n; ++i) {
            total += downlink[i] + uplink[i] + static_cast<int>(compute[i].size());
        }
        return total;
    }

    void emit(StationKind station, EventKind kind, std::size_t client) {
        recompute_power();
        if (trace) {
            trace(TraceEvent{time, station, kind, client, in_system()});
        }
    }

    void enter_downlink(const SimTask& task) {
        ++downlink[task.client];
        schedule(StationKind::Downlink, EventKind::DownlinkDone, 1.0 / config.clients[task.client].mu_d, task);
        emit(StationKind::Downlink, EventKind::Dispatch, task.client);
    }

    UpdateStep apply(const SimTask& task) {
        ++rounds;
        UpdateStep step;
        step.round = rounds;
        step.time = time;
        step.applied = task;
        step.staleness = rounds - 1 - task.dispatch_round;
        const std::size_t client = routing(streams[3 * n + 1]);
        step.dispatched = SimTask{next_task++, client, rounds};
        enter_downlink(step.dispatched);
        assert(in_system() == config.m);
        return step;
    }

    UpdateStep step() {
        for (;;) {
            if (events.empty()) {
                throw std::logic_error("simulation ran out of events");
            }
            Event ev = events.top();
            events.pop();
            energy += power * (ev.time - time);
            time = ev.time;
            const std::size_t i = ev.task.client;
            const ClientProfile& c = config.clients[i];

            switch (ev.kind) {
            case EventKind::DownlinkDone:
                --downlink[i];
                compute[i].push_back(ev.task);
                if (compute[i].size() == 1) {
                    schedule(StationKind::Compute, EventKind::ComputeDone, 1.0 / c.mu_c, ev.task);
                }
                emit(StationKind::Downlink, EventKind::DownlinkDone, i);
                break;
            case EventKind::ComputeDone:
                compute[i].pop_front();
                if (!compute[i].empty()) {
                    schedule(StationKind::Compute, EventKind::ComputeDone, 1.0 / c.mu_c, compute[i].front());
                }
                ++uplink[i];
                schedule(StationKind::Uplink, EventKind::UplinkDone, 1.0 / c.mu_u, ev.task);
                emit(StationKind::Compute, EventKind::ComputeDone, i);
                break;
            case EventKind::UplinkDone:
                --uplink[i];
                if (!with_cs) {
                    emit(StationKind::Uplink, EventKind::UplinkDone, i);
                    return apply(ev.task);
                }
                cs_queue.push_back(ev.task);
                if (cs_queue.size() == 1) {
                    schedule_cs(ev.task);
                }
                emit(StationKind::Uplink, EventKind::UplinkDone, i);
                break;
            case EventKind::CentralServerDone: {
                SimTask done = cs_queue.front();
                cs_queue.pop_front();
                if (!cs_queue.empty()) {
                    schedule_cs(cs_queue.front());
                }
                emit(StationKind::CentralServer, EventKind::CentralServerDone, i);
                return apply(done);
            }
            case EventKind::Dispatch:
                break;
            }
        }
    }

    void schedule_cs(const SimTask& task) {
        const double duration = law.sample(1.0 / config.cs->mu_cs, streams[3 * n]);
        events.push(Event{time + duration, priority(StationKind::CentralServer), 0, seq++,
                          EventKind::CentralServerDone, task});
    }
};

NetworkSimulator::NetworkSimulator(const SystemConfig& config, ServiceLaw law, std::uint64_t seed, bool with_cs)
    : impl_(std::make_unique<Impl>(config, law, seed, with_cs)) {}

NetworkSimulator::~NetworkSimulator() = default;

const std::vector<SimTask>& NetworkSimulator::initial_tasks() const {
    return impl_->initial;
}

UpdateStep NetworkSimulator::step() {
    return impl_->step();
}

double NetworkSimulator::now() const {
    return impl_->time;
}

std::uint64_t NetworkSimulator::rounds() const {
    return impl_->rounds;
}

double NetworkSimulator::energy() const {
    return impl_->energy;
}

int NetworkSimulator::tasks_in_system() const {
    return impl_->in_system();
}

void NetworkSimulator::set_trace_callback(std::function<void(const TraceEvent&)> callback) {
    impl_->trace = std::move(callback);
    // Replay the initial placement so a trace always starts from an empty network.
    if (impl_->trace && impl_->rounds == 0 && impl_->time == 0.0) {
        int count = 0;
        for (const SimTask& task : impl_->initial) {
            impl_->trace(TraceEvent{0.0, StationKind::Downlink, EventKind::Dispatch, task.client, ++count});
        }
    }
}

SimStats run_simulation(const SystemConfig& config, ServiceLaw law, const SimHorizon& horizon, std::uint64_t seed,
                        const SimOptions& options) {
    if (!horizon.rounds && !horizon.time_limit) {
        throw std::invalid_argument("simulation horizon needs a round target or a time limit");
    }
    if ((horizon.rounds && *horizon.rounds == 0) || (horizon.time_limit && !(*horizon.time_limit > 0.0))) {
        throw std::invalid_argument("simulation horizon must be positive");
    }
    if (options.batches < 1) {
        throw std::invalid_argument("need at least one batch");
    }
    const std::uint64_t warmup = options.warmup.value_or(default_warmup(config.m));

    NetworkSimulator sim(config, law, seed, options.with_cs);
    if (options.trace) {
        sim.set_trace_callback([trace = options.trace](const TraceEvent& e) { trace->push_back(e); });
    }
    const std::size_t n = config.n();

    for (std::uint64_t k = 0; k < warmup; ++k) {
        UpdateStep s = sim.step();
        if (horizon.time_limit && s.time > *horizon.time_limit) {
            throw std::invalid_argument("time limit ends inside the warmup");
        }
    }
    const double t_start = sim.now();
    const double e_start = sim.energy();

    // Per measured round: completion time, cumulative energy, acting client.
    std::vector<double> times;
    std::vector<double> energies;
    std::vector<std::size_t> clients;
    // Per window dispatch (indexed by dispatch round - warmup - 1): client and staleness.
    std::vector<std::size_t> dispatch_client;
    std::vector<double> dispatch_delay;
    std::uint64_t pending = 0;

    auto record_application = [&](const UpdateStep& s, std::uint64_t window_end) {
        const std::uint64_t d = s.applied.dispatch_round;
        if (d > warmup && d <= window_end) {
            dispatch_delay[d - warmup - 1] = static_cast<double>(s.staleness);
            --pending;
        }
    };

    const std::uint64_t max_rounds = horizon.rounds.value_or(std::numeric_limits<std::uint64_t>::max());
    std::uint64_t window_end = std::numeric_limits<std::uint64_t>::max();
    while (times.size() < max_rounds) {
        UpdateStep s = sim.step();
        if (horizon.time_limit && s.time > *horizon.time_limit) {
            // This update falls outside the window; its dispatch does too.
            window_end = warmup + times.size();
            record_application(s, window_end);
            break;
        }
        times.push_back(s.time);
        energies.push_back(sim.energy());
        clients.push_back(s.applied.client);
        dispatch_client.push_back(s.dispatched.client);
        dispatch_delay.push_back(0.0);
        ++pending;
        record_application(s, std::numeric_limits<std::uint64_t>::max());
    }
    if (window_end == std::numeric_limits<std::uint64_t>::max()) {
        window_end = warmup + times.size();
    }
    const std::uint64_t rounds = times.size();
    if (rounds == 0) {
        throw std::invalid_argument("no rounds completed inside the measurement window");
    }
    // Drain: every task dispatched in the window must be applied.
    while (pending > 0) {
        record_application(sim.step(), window_end);
    }

    SimStats stats;
    stats.seed = seed;
    stats.warmup_discarded = warmup;
    stats.rounds_completed = rounds;
    stats.sim_time = times.back() - t_start;
    stats.empirical_throughput = static_cast<double>(rounds) / stats.sim_time;
    stats.energy_total = energies.back() - e_start;
    stats.energy_per_round = stats.energy_total / static_cast<double>(rounds);
    stats.empirical_delays.assign(n, 0.0);
    stats.per_client_update_fraction.assign(n, 0.0);
    for (std::uint64_t k = 0; k < rounds; ++k) {
        stats.empirical_delays[dispatch_client[k]] += dispatch_delay[k];
        stats.per_client_update_fraction[clients[k]] += 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        stats.empirical_delays[i] /= static_cast<double>(rounds);
        stats.per_client_update_fraction[i] /= static_cast<double>(rounds);
    }

    // Batch means over the first batches * size rounds.
    const std::uint64_t batches = std::min<std::uint64_t>(static_cast<std::uint64_t>(options.batches), rounds);
    const std::uint64_t size = rounds / batches;
    std::vector<double> durations(batches), energy(batches);
    std::vector<std::vector<double>> delay(n, std::vector<double>(batches, 0.0));
    std::vector<std::vector<double>> fraction(n, std::vector<double>(batches, 0.0));
    for (std::uint64_t b = 0; b < batches; ++b) {
        const std::uint64_t lo = b * size;
        const std::uint64_t hi = lo + size;
        const double t0 = lo == 0 ? t_start : times[lo - 1];
        const double e0 = lo == 0 ? e_start : energies[lo - 1];
        durations[b] = times[hi - 1] - t0;
        energy[b] = (energies[hi - 1] - e0) / static_cast<double>(size);
        for (std::uint64_t k = lo; k < hi; ++k) {
            delay[dispatch_client[k]][b] += dispatch_delay[k] / static_cast<double>(size);
            fraction[clients[k]][b] += 1.0 / static_cast<double>(size);
        }
    }
    const double mean_duration = sample_mean(durations);
    stats.throughput_se = mean_duration > 0.0
                              ? stats.empirical_throughput * standard_error(durations) / mean_duration
                              : 0.0;
    stats.energy_per_round_se = standard_error(energy);
    for (std::size_t i = 0; i < n; ++i) {
        stats.delay_se.push_back(standard_error(delay[i]));
        stats.update_fraction_se.push_back(standard_error(fraction[i]));
    }
    return stats;
}

EnergyMeasurement measure_energy(const std::vector<TraceEvent>& trace, const SystemConfig& config) {
    validate(config);
    const std::size_t n = config.n();
    std::vector<int> downlink(n, 0), compute(n, 0), uplink(n, 0);
    int cs_queue = 0;
    bool with_cs = false;
    for (const TraceEvent& e : trace) {
        if (e.event == EventKind::CentralServerDone) {
            with_cs = true;
            break;
        }
    }
    if (with_cs && !config.cs) {
        throw ConfigError("trace contains central-server events but the config has no \"cs\" block");
    }

    auto power = [&]() {
        double p = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const ClientProfile& c = config.clients[i];
            p += c.p_d * downlink[i] + c.p_u * uplink[i] + (compute[i] > 0 ? c.p_c : 0.0);
        }
        if (cs_queue > 0) {
            p += config.cs->p_cs;
        }
        return p;
    };

    EnergyMeasurement out;
    std::uint64_t rounds = 0;
    double last = trace.empty() ? 0.0 : trace.front().time;
    double current = 0.0;
    for (const TraceEvent& e : trace) {
        if (e.client >= n) {
            throw std::invalid_argument("trace refers to an unknown client");
        }
        out.energy_total += current * (e.time - last);
        last = e.time;
        switch (e.event) {
        case EventKind::Dispatch:
            ++downlink[e.client];
            break;
        case EventKind::DownlinkDone:
            --downlink[e.client];
            ++compute[e.client];
            break;
        case EventKind::ComputeDone:
            --compute[e.client];
            ++uplink[e.client];
            break;
        case EventKind::UplinkDone:
            --uplink[e.client];
            if (with_cs) {
                ++cs_queue;
            } else {
                ++rounds;
            }
            break;
        case EventKind::CentralServerDone:
            --cs_queue;
            ++rounds;
            break;
        }
        current = power();
    }
    out.energy_per_round = rounds > 0 ? out.energy_total / static_cast<double>(rounds) : 0.0;
    return out;
}

} // namespace asyncfl
