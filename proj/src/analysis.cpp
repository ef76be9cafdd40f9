#include "asyncfl/analysis.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "asyncfl/kernels.hpp"

namespace asyncfl {

namespace {

// All loads divided by the table scale s. With R[k] = Z_{M-k} / Z_M (scaled
// mantissas), P(compute queue i >= k) = a_i^k R[k] and every other tail
// probability has the same shape.
struct Scaled {
    std::size_t n = 0;
    std::size_t M = 0;
    double s = 1.0;
    double total_p = 0.0;
    std::vector<double> R;  // R[0..M]
    std::vector<double> a;
    std::vector<double> g;
    std::vector<double> q;
    bool cs = false;
    double c = 0.0;
    std::vector<double> U;   // n x M, U[i*M + k-1] = a_i^k
    std::vector<double> uc;  // c^k, k = 1..M

    std::span<const double> row(std::size_t i) const { return {U.data() + i * M, M}; }
    // R[offset+1 .. M], paired with the first M - offset powers.
    std::span<const double> tail(std::size_t offset) const { return {R.data() + 1 + offset, M - offset}; }
};

void check_net(const NormalizationTable& table, const NetworkInputs& net) {
    if (net.clients.empty()) {
        throw std::invalid_argument("analysis needs at least one client");
    }
    if (net.clients.size() != net.p.size()) {
        throw std::invalid_argument("routing length does not match the number of clients");
    }
    if (table.variant() != net.model()) {
        throw std::invalid_argument("normalization table variant does not match the model");
    }
    for (double v : net.p) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("routing loads must be positive and finite");
        }
    }
}

void check_population(const NormalizationTable& table, int m) {
    if (m < 1) {
        throw std::invalid_argument("concurrency m must be at least 1");
    }
    if (table.population() < m) {
        throw std::invalid_argument("normalization table population " + std::to_string(table.population()) +
                                    " is below m = " + std::to_string(m));
    }
}

std::vector<double> powers(double base, std::size_t count) {
    std::vector<double> out(count);
    double v = 1.0;
    for (std::size_t k = 0; k < count; ++k) {
        v *= base;
        out[k] = v;
    }
    return out;
}

Scaled prepare(const NormalizationTable& table, const NetworkInputs& net, int population) {
    check_net(table, net);
    if (population < 0 || population > table.population()) {
        throw std::invalid_argument("population outside the normalization table");
    }
    Scaled sc;
    sc.n = net.p.size();
    sc.M = static_cast<std::size_t>(population);
    sc.s = table.scale();
    sc.total_p = std::accumulate(net.p.begin(), net.p.end(), 0.0);

    const double top = table.scaled(population);
    sc.R.resize(sc.M + 1);
    for (std::size_t k = 0; k <= sc.M; ++k) {
        sc.R[k] = table.scaled(population - static_cast<int>(k)) / top;
    }

    sc.a.resize(sc.n);
    sc.g.resize(sc.n);
    sc.q.resize(sc.n);
    sc.U.resize(sc.n * sc.M);
    for (std::size_t i = 0; i < sc.n; ++i) {
        const ClientProfile& cp = net.clients[i];
        sc.a[i] = net.p[i] / cp.mu_c / sc.s;
        sc.g[i] = net.p[i] * (1.0 / cp.mu_d + 1.0 / cp.mu_u) / sc.s;
        sc.q[i] = net.p[i] / sc.total_p;
        std::vector<double> pw = powers(sc.a[i], sc.M);
        std::copy(pw.begin(), pw.end(), sc.U.begin() + static_cast<std::ptrdiff_t>(i * sc.M));
    }
    if (net.mu_cs) {
        sc.cs = true;
        sc.c = sc.total_p / *net.mu_cs / sc.s;
        sc.uc = powers(sc.c, sc.M);
    }
    return sc;
}

double r_at(const Scaled& sc, std::size_t k) {
    return k <= sc.M ? sc.R[k] : 0.0;
}

std::vector<double> first_moments(const Scaled& sc) {
    std::vector<double> out(sc.n, 0.0);
    if (sc.M == 0) {
        return out;
    }
    const double cs_part = sc.cs ? kernels::dot(sc.uc, sc.tail(0)) : 0.0;
    for (std::size_t i = 0; i < sc.n; ++i) {
        out[i] = kernels::dot(sc.row(i), sc.tail(0)) + sc.g[i] * sc.R[1] + sc.q[i] * cs_part;
    }
    return out;
}

// h[k-1] = sum_{l=1}^{M-k} R[k+l] u[l-1], i.e. the Hankel matrix R[k+l] applied to u.
std::vector<double> hankel_apply(const Scaled& sc, std::span<const double> u) {
    std::vector<double> h(sc.M, 0.0);
    for (std::size_t k = 1; k < sc.M; ++k) {
        h[k - 1] = kernels::dot(u.subspan(0, sc.M - k), sc.tail(k));
    }
    return h;
}

// sum_k (2k - 1) a^k R[k]
double diagonal_alpha(const Scaled& sc, std::span<const double> u) {
    double out = 0.0;
    for (std::size_t k = 1; k <= sc.M; ++k) {
        out += static_cast<double>(2 * k - 1) * u[k - 1] * sc.R[k];
    }
    return out;
}

// sum_k a^k R[k+1]
double shifted_tail(const Scaled& sc, std::span<const double> u) {
    return sc.M < 2 ? 0.0 : kernels::dot(u.subspan(0, sc.M - 1), sc.tail(1));
}

// Coefficients in scaled units; natural units differ only by powers of s.
struct ScaledCoefficients {
    std::vector<double> beta1;
    std::vector<double> beta2;
    Matrix alpha;
    Matrix psi;
    double cs_tail = 0.0;        // sum_k c^k R[k]
    double cs_factorial = 0.0;   // sum_k 2(k-1) c^k R[k]
    double cs_shifted = 0.0;     // sum_k c^k R[k+1]
    std::vector<double> cs_row;  // u_c^T H u_i
};

ScaledCoefficients scaled_coefficients(const Scaled& sc) {
    const std::size_t n = sc.n;
    ScaledCoefficients co;
    co.beta1.assign(n, 0.0);
    co.beta2.assign(n, 0.0);
    co.alpha = Matrix(n, n);
    co.psi = Matrix(n, n);
    co.cs_row.assign(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            co.psi(i, j) = sc.g[i] * sc.g[j] * r_at(sc, 2) + (i == j ? sc.g[i] * r_at(sc, 1) : 0.0);
        }
    }
    if (sc.M == 0) {
        return co;
    }

    // Column j of alpha is U (n x M) times H u_j.
    std::vector<double> column(n);
    for (std::size_t j = 0; j < n; ++j) {
        co.beta1[j] = kernels::dot(sc.row(j), sc.tail(0));
        co.beta2[j] = shifted_tail(sc, sc.row(j));
        std::vector<double> h = hankel_apply(sc, sc.row(j));
        kernels::gemv(sc.U, h, column);
        for (std::size_t i = 0; i < n; ++i) {
            co.alpha(i, j) = column[i];
        }
        if (sc.cs) {
            co.cs_row[j] = kernels::dot(sc.uc, h);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        co.alpha(i, i) = diagonal_alpha(sc, sc.row(i));
    }
    if (sc.cs) {
        co.cs_tail = kernels::dot(sc.uc, sc.tail(0));
        co.cs_shifted = shifted_tail(sc, sc.uc);
        for (std::size_t k = 1; k <= sc.M; ++k) {
            co.cs_factorial += 2.0 * static_cast<double>(k - 1) * sc.uc[k - 1] * sc.R[k];
        }
    }
    return co;
}

// E[S_i S_j] from the scaled coefficients.
Matrix second_moments(const Scaled& sc, const ScaledCoefficients& co) {
    const std::size_t n = sc.n;
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double v = co.alpha(i, j) + co.beta2[i] * sc.g[j] + co.beta2[j] * sc.g[i] + co.psi(i, j);
            if (sc.cs) {
                v += sc.q[i] * (sc.q[j] * co.cs_factorial + (i == j ? co.cs_tail : 0.0));
                v += co.cs_shifted * (sc.q[i] * sc.g[j] + sc.q[j] * sc.g[i]);
                v += sc.q[i] * co.cs_row[j] + sc.q[j] * co.cs_row[i];
            }
            out(i, j) = v;
        }
    }
    return out;
}

} // namespace

std::vector<double> mean_client_occupancy(const NormalizationTable& table, const NetworkInputs& net,
                                          int population) {
    return first_moments(prepare(table, net, population));
}

std::vector<double> delays(const NormalizationTable& table, const NetworkInputs& net, int m) {
    check_net(table, net);
    check_population(table, m);
    return mean_client_occupancy(table, net, m - 1);
}

Matrix jacobian(const NormalizationTable& table, const NetworkInputs& net, int m) {
    check_net(table, net);
    check_population(table, m);
    const Scaled sc = prepare(table, net, m - 1);
    const std::vector<double> mean = first_moments(sc);
    const Matrix second = second_moments(sc, scaled_coefficients(sc));
    Matrix out(sc.n, sc.n);
    for (std::size_t i = 0; i < sc.n; ++i) {
        for (std::size_t j = 0; j < sc.n; ++j) {
            out(i, j) = (second(i, j) - mean[i] * mean[j]) / net.p[j];
        }
    }
    return out;
}

std::vector<double> delay_vjp(const NormalizationTable& table, const NetworkInputs& net, int m,
                              std::span<const double> weights) {
    check_net(table, net);
    check_population(table, m);
    if (weights.size() != net.p.size()) {
        throw std::invalid_argument("delay_vjp: weight length does not match the number of clients");
    }
    const Scaled sc = prepare(table, net, m - 1);
    const std::size_t n = sc.n;
    std::vector<double> out(n, 0.0);
    if (sc.M == 0) {
        return out;
    }
    const std::vector<double> mean = first_moments(sc);
    const double w_mean = kernels::dot(weights, mean);
    const double w_g = kernels::dot(weights, sc.g);
    const double w_q = kernels::dot(weights, sc.q);

    // sum_i w_i beta2_i and sum_i w_i u_i
    std::vector<double> mixed(sc.M, 0.0);
    double w_beta2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        kernels::axpy(weights[i], sc.row(i), mixed);
        w_beta2 += weights[i] * shifted_tail(sc, sc.row(i));
    }
    const std::vector<double> z = hankel_apply(sc, mixed);

    double cs_tail = 0.0;
    double cs_factorial = 0.0;
    double cs_shifted = 0.0;
    double w_cs_row = 0.0;
    std::vector<double> hc;
    if (sc.cs) {
        hc = hankel_apply(sc, sc.uc);
        cs_tail = kernels::dot(sc.uc, sc.tail(0));
        cs_shifted = shifted_tail(sc, sc.uc);
        for (std::size_t k = 1; k <= sc.M; ++k) {
            cs_factorial += 2.0 * static_cast<double>(k - 1) * sc.uc[k - 1] * sc.R[k];
        }
        // sum_i w_i u_c^T H u_i = u_c^T z
        w_cs_row = kernels::dot(sc.uc, z);
    }

    for (std::size_t j = 0; j < n; ++j) {
        std::span<const double> u = sc.row(j);
        // u_j^T H u_j = sum_t (t - 1) a_j^t R[t]
        double self = 0.0;
        for (std::size_t t = 2; t <= sc.M; ++t) {
            self += static_cast<double>(t - 1) * u[t - 1] * sc.R[t];
        }
        double v = kernels::dot(u, z) + weights[j] * (diagonal_alpha(sc, u) - self);
        v += w_beta2 * sc.g[j] + shifted_tail(sc, u) * w_g;
        v += sc.g[j] * r_at(sc, 2) * w_g + weights[j] * sc.g[j] * sc.R[1];
        if (sc.cs) {
            v += w_q * sc.q[j] * cs_factorial + weights[j] * sc.q[j] * cs_tail;
            v += cs_shifted * (w_q * sc.g[j] + sc.q[j] * w_g);
            v += w_q * kernels::dot(hc, u) + sc.q[j] * w_cs_row;
        }
        out[j] = (v - w_mean * mean[j]) / net.p[j];
    }
    return out;
}

CoefficientTable coefficients(const NormalizationTable& table, const NetworkInputs& net, int m) {
    check_net(table, net);
    check_population(table, m);
    const Scaled sc = prepare(table, net, m - 1);
    const ScaledCoefficients co = scaled_coefficients(sc);
    const std::size_t n = sc.n;

    CoefficientTable out;
    out.gamma.resize(n);
    out.beta2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.gamma[i] = sc.g[i] * sc.s;
        out.beta2[i] = co.beta2[i] / sc.s;
    }
    out.beta1 = co.beta1;
    out.alpha = co.alpha;
    out.psi = co.psi;
    out.alpha_cs_row.assign(n, 0.0);
    out.alpha_cs_pair = Matrix(n, n);
    if (sc.cs) {
        // Expressed per unit of p_i, matching q_i = p_i / sum(p).
        out.beta_cs1 = co.cs_tail / sc.total_p;
        out.beta_cs2 = co.cs_shifted / sc.s / sc.total_p;
        for (std::size_t i = 0; i < n; ++i) {
            out.alpha_cs_row[i] = co.cs_row[i] / sc.total_p;
            for (std::size_t j = 0; j < n; ++j) {
                out.alpha_cs_pair(i, j) = sc.q[i] * (sc.q[j] * co.cs_factorial + (i == j ? co.cs_tail : 0.0));
            }
        }
    }
    return out;
}

DelayReport delay_report(const NetworkInputs& net, int m) {
    const NormalizationTable table =
        normalization_constants(net.model(), net.clients, net.p, m, net.mu_cs);
    DelayReport report;
    report.delays = delays(table, net, m);
    report.jacobian = jacobian(table, net, m);
    report.model = net.model();
    return report;
}

std::vector<double> expected_delays(const NormalizationTable& table, std::span<const ClientProfile> profiles,
                                    std::span<const double> p, int m) {
    return delays(table, NetworkInputs{profiles, p, std::nullopt}, m);
}

Matrix delay_jacobian(const NormalizationTable& table, std::span<const ClientProfile> profiles,
                      std::span<const double> p, int m) {
    return jacobian(table, NetworkInputs{profiles, p, std::nullopt}, m);
}

std::vector<double> expected_delays_cs(const NormalizationTable& table_w, std::span<const ClientProfile> profiles,
                                       std::span<const double> p, int m, double mu_cs) {
    return delays(table_w, NetworkInputs{profiles, p, mu_cs}, m);
}

Matrix delay_jacobian_cs(const NormalizationTable& table_w, std::span<const ClientProfile> profiles,
                         std::span<const double> p, int m, double mu_cs) {
    return jacobian(table_w, NetworkInputs{profiles, p, mu_cs}, m);
}

double throughput(const NormalizationTable& table) {
    if (table.population() < 1) {
        throw std::invalid_argument("throughput needs a table with population >= 1");
    }
    return table.ratio(table.population());
}

std::vector<double> throughput_gradient(const NormalizationTable& table, const NetworkInputs& net, int m) {
    check_net(table, net);
    check_population(table, m);
    const double lambda = table.ratio(m);
    const std::vector<double> below = mean_client_occupancy(table, net, m - 1);
    const std::vector<double> at = mean_client_occupancy(table, net, m);
    std::vector<double> out(net.p.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = lambda * (below[j] - at[j]) / net.p[j];
    }
    return out;
}

} // namespace asyncfl
