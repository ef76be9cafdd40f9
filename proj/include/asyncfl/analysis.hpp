#pragma once

// Closed-form steady-state metrics of the closed network: expected relative
// delays, their Jacobian with respect to the routing loads, throughput and
// its gradient. Both the instantaneous-update model (Z tables) and the
// central-server-queue model (W tables) are covered.
//
// Every function takes raw routing loads p (not required to sum to one) and
// returns partial derivatives with respect to individual raw entries. The
// delays are homogeneous of degree 0 in p and the throughput of degree -1.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "asyncfl/buzen.hpp"
#include "asyncfl/model.hpp"

namespace asyncfl {

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct DelayReport {
    std::vector<double> delays;  // E0[D_i], in rounds
    Matrix jacobian;             // d E0[D_i] / d p_j
    Model model = Model::NoCS;
};

/// Coefficients of the first and second moment expressions, in natural
/// (unscaled) units, evaluated at population m - 1.
struct CoefficientTable {
    std::vector<double> gamma;  // p_i (1/mu_d + 1/mu_u)
    std::vector<double> beta1;
    std::vector<double> beta2;
    Matrix alpha;
    Matrix psi;
    // Central-server queue terms; zero for the NoCS model.
    double beta_cs1 = 0.0;
    double beta_cs2 = 0.0;
    std::vector<double> alpha_cs_row;
    Matrix alpha_cs_pair;
};

/// Shared description of the network for the generic entry points.
struct NetworkInputs {
    std::span<const ClientProfile> clients;
    std::span<const double> p;
    std::optional<double> mu_cs;  // set for the WithCS model

    Model model() const { return mu_cs ? Model::WithCS : Model::NoCS; }
};

// --- generic entry points (model chosen by NetworkInputs::mu_cs) ---

/// Expected number of client-i tasks anywhere in the network (including
/// class-i tasks waiting at the central server) under the stationary
/// distribution with `population` tasks. The table must cover it.
std::vector<double> mean_client_occupancy(const NormalizationTable& table, const NetworkInputs& net,
                                          int population);

std::vector<double> delays(const NormalizationTable& table, const NetworkInputs& net, int m);
Matrix jacobian(const NormalizationTable& table, const NetworkInputs& net, int m);

/// sum_i weights[i] * d E0[D_i] / d p_j for every j, in O(m^2 + n m) after the
/// table is built; never materializes the Jacobian.
std::vector<double> delay_vjp(const NormalizationTable& table, const NetworkInputs& net, int m,
                              std::span<const double> weights);

CoefficientTable coefficients(const NormalizationTable& table, const NetworkInputs& net, int m);

/// Builds the table for population m and returns delays plus Jacobian.
DelayReport delay_report(const NetworkInputs& net, int m);

// --- named operations ---

std::vector<double> expected_delays(const NormalizationTable& table, std::span<const ClientProfile> profiles,
                                    std::span<const double> p, int m);
Matrix delay_jacobian(const NormalizationTable& table, std::span<const ClientProfile> profiles,
                      std::span<const double> p, int m);

std::vector<double> expected_delays_cs(const NormalizationTable& table_w, std::span<const ClientProfile> profiles,
                                       std::span<const double> p, int m, double mu_cs);
Matrix delay_jacobian_cs(const NormalizationTable& table_w, std::span<const ClientProfile> profiles,
                         std::span<const double> p, int m, double mu_cs);

/// Rounds per unit time: Z_{m-1} / Z_m with m the table's population.
double throughput(const NormalizationTable& table);

/// d lambda / d p_j; the table must have population m.
std::vector<double> throughput_gradient(const NormalizationTable& table, const NetworkInputs& net, int m);

} // namespace asyncfl
