#pragma once

// Discrete-event simulation of the closed network: per-client downlink (IS),
// compute (FIFO single server) and uplink (IS) stations, optionally followed
// by a multi-class FIFO central-server queue.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string_view>
#include <vector>

#include "asyncfl/model.hpp"

namespace asyncfl {

struct ServiceLaw {
    enum class Kind { Exponential, Deterministic, Lognormal };
    Kind kind = Kind::Exponential;

    /// Draws a service time with the given mean. Lognormal uses an
    /// underlying normal with variance 1.
    double sample(double mean, std::mt19937_64& rng) const;
};

std::string_view to_string(ServiceLaw::Kind kind);
ServiceLaw::Kind parse_service_law(std::string_view text);

enum class StationKind { CentralServer = 0, Downlink = 1, Compute = 2, Uplink = 3 };
enum class EventKind { Dispatch, DownlinkDone, ComputeDone, UplinkDone, CentralServerDone };

std::string_view to_string(StationKind kind);
std::string_view to_string(EventKind kind);

struct SimTask {
    std::uint64_t id = 0;
    std::size_t client = 0;
    std::uint64_t dispatch_round = 0;  // updates applied before its dispatch
};

/// One row of the event trace; the state is piecewise constant between rows.
struct TraceEvent {
    double time = 0.0;
    StationKind station = StationKind::Downlink;
    EventKind event = EventKind::Dispatch;
    std::size_t client = 0;
    int tasks_in_system = 0;
};

/// Result of advancing to the next model update.
struct UpdateStep {
    std::uint64_t round = 0;  // 1-based index of this update
    double time = 0.0;
    SimTask applied;
    SimTask dispatched;
    std::uint64_t staleness = 0;  // updates strictly between dispatch and application
};

/// Event engine. Model updates happen at uplink completions (no central
/// server queue) or at central-server completions; each update immediately
/// dispatches a fresh task to a client drawn from the routing vector.
class NetworkSimulator {
public:
    /// `with_cs` adds the central-server queue (the config must carry one).
    NetworkSimulator(const SystemConfig& config, ServiceLaw law, std::uint64_t seed, bool with_cs);
    ~NetworkSimulator();
    NetworkSimulator(const NetworkSimulator&) = delete;
    NetworkSimulator& operator=(const NetworkSimulator&) = delete;

    /// Initial tasks placed on downlinks; dispatch rows for them are emitted
    /// through the trace callback at time 0.
    const std::vector<SimTask>& initial_tasks() const;

    UpdateStep step();

    double now() const;
    std::uint64_t rounds() const;
    /// Integral of the instantaneous power from time 0 to now().
    double energy() const;
    int tasks_in_system() const;

    /// Called for every state change, including the initial dispatches.
    void set_trace_callback(std::function<void(const TraceEvent&)> callback);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SimHorizon {
    std::optional<std::uint64_t> rounds;  // measured rounds after warmup
    std::optional<double> time_limit;     // simulated time, warmup included
};

struct SimStats {
    std::uint64_t rounds_completed = 0;  // in the measurement window
    double sim_time = 0.0;               // length of the measurement window
    double empirical_throughput = 0.0;
    std::vector<double> empirical_delays;
    std::vector<double> per_client_update_fraction;
    double energy_total = 0.0;  // in the measurement window
    double energy_per_round = 0.0;
    std::uint64_t warmup_discarded = 0;
    std::uint64_t seed = 0;

    // Batch-means standard errors.
    double throughput_se = 0.0;
    std::vector<double> delay_se;
    std::vector<double> update_fraction_se;
    double energy_per_round_se = 0.0;

    bool operator==(const SimStats&) const = default;
};

struct SimOptions {
    std::optional<std::uint64_t> warmup;  // default max(10 m, 1000) rounds
    int batches = 100;
    bool with_cs = false;
    /// When set, every event (warmup included) is appended here.
    std::vector<TraceEvent>* trace = nullptr;
};

std::uint64_t default_warmup(int m);

SimStats run_simulation(const SystemConfig& config, ServiceLaw law, const SimHorizon& horizon, std::uint64_t seed,
                        const SimOptions& options = {});

struct EnergyMeasurement {
    double energy_total = 0.0;
    double energy_per_round = 0.0;
};

/// Exact piecewise integral of the power over a full trace (starting with
/// the initial dispatches at time 0); rounds are the update events in it.
EnergyMeasurement measure_energy(const std::vector<TraceEvent>& trace, const SystemConfig& config);

/// Deterministic sub-seed k of a master seed (SplitMix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k);

} // namespace asyncfl
