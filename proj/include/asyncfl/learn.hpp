#pragma once

// Generalized asynchronous SGD on least-squares tasks, driven by the event
// order of the network simulator.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncfl/model.hpp"
#include "asyncfl/simulate.hpp"

namespace asyncfl {

/// Raised when the loss exceeds the divergence threshold.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// f_i(w) = 1/2 |A w - b|^2 / rows + ridge/2 |w|^2
struct ClientData {
    std::size_t rows = 0;
    std::vector<double> design;  // row-major rows x dim
    std::vector<double> target;  // rows

    // Precomputed quadratic form: f_i(w) = 1/2 w'Hw - c'w + offset
    std::vector<double> hessian;  // dim x dim
    std::vector<double> linear;   // dim
    double offset = 0.0;
};

struct FederatedTask {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<ClientData> clients;
    double noise_sigma = 0.0;
    double heterogeneity = 0.0;
    double ridge = 0.0;
    std::vector<double> w0;

    double client_loss(std::size_t i, std::span<const double> w) const;
    /// grad f_i(w) written into `out` (size dim).
    void client_gradient(std::size_t i, std::span<const double> w, std::span<double> out) const;
    double loss(std::span<const double> w) const;
    std::vector<double> gradient(std::span<const double> w) const;
    /// Unique minimizer of the average objective.
    std::vector<double> minimizer() const;
};

/// Builds a task from per-client (design, target) pairs; designs are
/// row-major with `dim` columns.
FederatedTask make_least_squares_task(std::size_t dim, std::vector<std::vector<double>> designs,
                                      std::vector<std::vector<double>> targets, std::vector<double> w0,
                                      double noise_sigma = 0.0, double ridge = 0.0);

/// Shared Gaussian design, per-client optima w_c + heterogeneity * z_i with
/// z_i ~ N(0, I), exact targets, ridge 1e-6, w0 a Gaussian point of norm 1.
FederatedTask make_synthetic_task(std::size_t n, std::size_t dim, double heterogeneity, double noise_sigma,
                                  std::uint64_t seed);

/// L from the averaged Hessian; M and G as maxima over `sample_count`
/// points drawn uniformly on the sphere of `radius` (plus w0); sigma from the
/// task; delta = f(w0) - f*.
LearningConstants estimate_constants(const FederatedTask& task, int sample_count, double radius,
                                     std::uint64_t seed = 0);

struct TrajectoryRecord {
    std::uint64_t k = 0;
    double t = 0.0;
    double energy = 0.0;
    double loss = 0.0;
    double grad_norm_sq = 0.0;
    std::size_t client = 0;
    std::uint64_t staleness = 0;

    bool operator==(const TrajectoryRecord&) const = default;
};

struct Trajectory {
    double initial_loss = 0.0;
    double initial_grad_norm_sq = 0.0;
    std::vector<TrajectoryRecord> records;
    std::vector<double> final_w;

    /// (1/(K+1)) sum over k = 0..K of |grad f(w_k)|^2
    double mean_grad_norm_sq() const;

    bool operator==(const Trajectory&) const = default;
};

struct LearnOptions {
    bool with_cs = false;
    double divergence_threshold = 1e12;
    /// Stop early once the loss falls to this value (the record that reaches
    /// it is kept).
    std::optional<double> stop_below;
};

/// K model updates. Each dispatched task carries a snapshot of the model;
/// at its completion w <- w - eta / (n p_C) * (grad f_C(snapshot) + noise).
Trajectory run_generalized_async_sgd(const FederatedTask& task, const SystemConfig& config, ServiceLaw law,
                                     double eta, std::uint64_t rounds, std::uint64_t seed,
                                     const LearnOptions& options = {});

/// First record with loss at or below the threshold.
std::optional<TrajectoryRecord> first_below(const Trajectory& trajectory, double loss_threshold);

/// {eta_max, eta_max / 2, eta_max / 4}
std::vector<double> learning_rate_grid(double eta_max);

} // namespace asyncfl
