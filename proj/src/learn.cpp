#include "asyncfl/learn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <unordered_map>

#include "asyncfl/kernels.hpp"

namespace asyncfl {

namespace {

constexpr double kSyntheticRidge = 1e-6;

Eigen::MatrixXd average_hessian(const FederatedTask& task) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(task.dim, task.dim);
    for (const ClientData& c : task.clients) {
        h += Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            c.hessian.data(), task.dim, task.dim);
    }
    return h / static_cast<double>(task.n);
}

std::vector<double> gaussian_point(std::size_t dim, double norm, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(dim);
    double s = 0.0;
    do {
        s = 0.0;
        for (double& v : x) {
            v = normal(rng);
            s += v * v;
        }
    } while (s == 0.0);
    const double scale = norm / std::sqrt(s);
    for (double& v : x) {
        v *= scale;
    }
    return x;
}

double norm_sq(std::span<const double> x) {
    return kernels::dot(x, x);
}

} // namespace

double FederatedTask::client_loss(std::size_t i, std::span<const double> w) const {
    const ClientData& c = clients.at(i);
    std::vector<double> hw(dim);
    kernels::gemv(c.hessian, w, hw);
    return 0.5 * kernels::dot(w, hw) - kernels::dot(c.linear, w) + c.offset;
}

void FederatedTask::client_gradient(std::size_t i, std::span<const double> w, std::span<double> out) const {
    const ClientData& c = clients.at(i);
    kernels::gemv(c.hessian, w, out);
    kernels::axpy(-1.0, c.linear, out);
}

double FederatedTask::loss(std::span<const double> w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += client_loss(i, w);
    }
    return s / static_cast<double>(n);
}

std::vector<double> FederatedTask::gradient(std::span<const double> w) const {
    std::vector<double> g(dim, 0.0), gi(dim);
    for (std::size_t i = 0; i < n; ++i) {
        client_gradient(i, w, gi);
        kernels::axpy(1.0 / static_cast<double>(n), gi, g);
    }
    return g;
}

std::vector<double> FederatedTask::minimizer() const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
    for (const ClientData& cl : clients) {
        c += Eigen::Map<const Eigen::VectorXd>(cl.linear.data(), dim);
    }
    c /= static_cast<double>(n);
    const Eigen::VectorXd w = average_hessian(*this).ldlt().solve(c);
    return std::vector<double>(w.data(), w.data() + dim);
}

FederatedTask make_least_squares_task(std::size_t dim, std::vector<std::vector<double>> designs,
                                      std::vector<std::vector<double>> targets, std::vector<double> w0,
                                      double noise_sigma, double ridge) {
    if (dim == 0 || designs.empty() || designs.size() != targets.size()) {
        throw std::invalid_argument("least-squares task needs dim >= 1 and matching designs and targets");
    }
    if (w0.size() != dim) {
        throw std::invalid_argument("w0 must have dim entries");
    }
    if (noise_sigma < 0.0 || ridge < 0.0) {
        throw std::invalid_argument("noise and ridge must be non-negative");
    }
    FederatedTask task;
    task.n = designs.size();
    task.dim = dim;
    task.noise_sigma = noise_sigma;
    task.ridge = ridge;
    task.w0 = std::move(w0);
    for (std::size_t i = 0; i < task.n; ++i) {
        ClientData c;
        c.rows = targets[i].size();
        if (c.rows == 0 || designs[i].size() != c.rows * dim) {
            throw std::invalid_argument("client " + std::to_string(i) + ": design shape does not match its target");
        }
        c.design = std::move(designs[i]);
        c.target = std::move(targets[i]);
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> a(c.design.data(), c.rows, dim);
        Eigen::Map<const Eigen::VectorXd> b(c.target.data(), c.rows);
        const double inv = 1.0 / static_cast<double>(c.rows);
        RowMat h = a.transpose() * a * inv;
        h.diagonal().array() += ridge;
        const Eigen::VectorXd lin = a.transpose() * b * inv;
        c.hessian.assign(h.data(), h.data() + dim * dim);
        c.linear.assign(lin.data(), lin.data() + dim);
        c.offset = 0.5 * b.squaredNorm() * inv;
        task.clients.push_back(std::move(c));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(average_hessian(task), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("average Hessian is singular; the objective has no unique minimizer");
    }
    return task;
}

FederatedTask make_synthetic_task(std::size_t n, std::size_t dim, double heterogeneity, double noise_sigma,
                                  std::uint64_t seed) {
    if (n < 1 || dim < 1) {
        throw std::invalid_argument("synthetic task needs n >= 1 and dim >= 1");
    }
    if (heterogeneity < 0.0) {
        throw std::invalid_argument("heterogeneity must be non-negative");
    }
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t rows = std::max<std::size_t>(2 * dim, 8);

    std::vector<double> design(rows * dim);
    for (double& v : design) {
        v = normal(rng);
    }
    std::vector<double> center(dim);
    for (double& v : center) {
        v = normal(rng);
    }
    std::vector<std::vector<double>> designs, targets;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> opt(center);
        for (double& v : opt) {
            v += heterogeneity * normal(rng);
        }
        std::vector<double> b(rows);
        kernels::gemv(design, opt, b);
        designs.push_back(design);
        targets.push_back(std::move(b));
    }
    std::vector<double> w0 = gaussian_point(dim, 1.0, rng);
    FederatedTask task = make_least_squares_task(dim, std::move(designs), std::move(targets), std::move(w0),
                                                 noise_sigma, kSyntheticRidge);
    task.heterogeneity = heterogeneity;
    return task;
}

LearningConstants estimate_constants(const FederatedTask& task, int sample_count, double radius,
                                     std::uint64_t seed) {
    if (sample_count < 1) {
        throw std::invalid_argument("sample_count must be at least 1");
    }
    if (!(radius >= 0.0)) {
        throw std::invalid_argument("radius must be non-negative");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(average_hessian(task), Eigen::EigenvaluesOnly);
    const double l_smooth = eig.eigenvalues().maxCoeff();
    const double delta = task.loss(task.w0) - task.loss(task.minimizer());

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> points{task.w0};
    for (int s = 0; s < sample_count; ++s) {
        points.push_back(gaussian_point(task.dim, radius, rng));
    }
    double m_dissim = 0.0;
    double g_bound = 0.0;
    std::vector<double> gi(task.dim), diff(task.dim);
    for (const std::vector<double>& w : points) {
        const std::vector<double> g = task.gradient(w);
        for (std::size_t i = 0; i < task.n; ++i) {
            task.client_gradient(i, w, gi);
            diff = gi;
            kernels::axpy(-1.0, g, diff);
            m_dissim = std::max(m_dissim, std::sqrt(norm_sq(diff)));
            g_bound = std::max(g_bound, std::sqrt(norm_sq(gi)));
        }
    }
    return LearningConstants(std::max(delta, 0.0), l_smooth, task.noise_sigma, m_dissim, g_bound);
}

double Trajectory::mean_grad_norm_sq() const {
    double s = initial_grad_norm_sq;
    for (const TrajectoryRecord& r : records) {
        s += r.grad_norm_sq;
    }
    return s / static_cast<double>(records.size() + 1);
}

Trajectory run_generalized_async_sgd(const FederatedTask& task, const SystemConfig& config, ServiceLaw law,
                                     double eta, std::uint64_t rounds, std::uint64_t seed,
                                     const LearnOptions& options) {
    if (!(eta > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (config.n() != task.n) {
        throw std::invalid_argument("config has " + std::to_string(config.n()) + " clients but the task has " +
                                    std::to_string(task.n));
    }
    NetworkSimulator sim(config, law, derive_seed(seed, 0), options.with_cs);
    std::mt19937_64 noise_rng(derive_seed(seed, 1));
    std::normal_distribution<double> noise(0.0, task.noise_sigma > 0.0 ? task.noise_sigma : 1.0);

    std::vector<double> w = task.w0;
    // Model snapshot each in-flight task was dispatched with.
    std::unordered_map<std::uint64_t, std::vector<double>> snapshots;
    for (const SimTask& t : sim.initial_tasks()) {
        snapshots.emplace(t.id, w);
    }

    Trajectory out;
    out.initial_loss = task.loss(w);
    out.initial_grad_norm_sq = norm_sq(task.gradient(w));
    out.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(rounds, 1u << 20)));
    std::vector<double> g(task.dim);
    const double n = static_cast<double>(task.n);
    const auto p = config.routing.values();

    for (std::uint64_t k = 0; k < rounds; ++k) {
        const UpdateStep s = sim.step();
        auto it = snapshots.find(s.applied.id);
        task.client_gradient(s.applied.client, it->second, g);
        snapshots.erase(it);
        if (task.noise_sigma > 0.0) {
            for (double& v : g) {
                v += noise(noise_rng);
            }
        }
        kernels::axpy(-eta / (n * p[s.applied.client]), g, w);
        snapshots.emplace(s.dispatched.id, w);

        TrajectoryRecord r;
        r.k = s.round;
        r.t = s.time;
        r.energy = sim.energy();
        r.loss = task.loss(w);
        r.grad_norm_sq = norm_sq(task.gradient(w));
        r.client = s.applied.client;
        r.staleness = s.staleness;
        out.records.push_back(r);
        if (!std::isfinite(r.loss) || r.loss > options.divergence_threshold) {
            throw DivergenceError("loss diverged at round " + std::to_string(r.k) + " (eta = " + std::to_string(eta) +
                                  "); lower the learning rate");
        }
        if (options.stop_below && r.loss <= *options.stop_below) {
            break;
        }
    }
    out.final_w = w;
    return out;
}

std::optional<TrajectoryRecord> first_below(const Trajectory& trajectory, double loss_threshold) {
    for (const TrajectoryRecord& r : trajectory.records) {
        if (r.loss <= loss_threshold) {
            return r;
        }
    }
    return std::nullopt;
}

std::vector<double> learning_rate_grid(double eta_max) {
    if (!(eta_max > 0.0)) {
        throw std::invalid_argument("eta_max must be positive");
    }
    return {eta_max, eta_max / 2.0, eta_max / 4.0};
}

} // namespace asyncfl
