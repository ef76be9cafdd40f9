#pragma once

// Domain types shared by every module: client profiles, routing, system
// configuration and the learning constants that enter the complexity bounds.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace asyncfl {

/// Raised for malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Which queueing network is being modelled: instantaneous central-server
/// updates, or a FIFO central-server queue in front of the model update.
enum class Model { NoCS, WithCS };

std::string_view to_string(Model model);
Model parse_model(std::string_view text);

/// Service rates (tasks per unit time) and phase power draws of one client.
struct ClientProfile {
    double mu_d = 1.0;  // downlink
    double mu_c = 1.0;  // compute
    double mu_u = 1.0;  // uplink
    double p_d = 0.0;
    double p_c = 0.0;
    double p_u = 0.0;

    /// Expected energy spent on one task: P^c/mu^c + P^u/mu^u + P^d/mu^d.
    double energy_per_task() const { return p_c / mu_c + p_u / mu_u + p_d / mu_d; }

    bool operator==(const ClientProfile&) const = default;
};

/// Probability vector over clients. Entries are bounded below by
/// kMinProbability and sum to one.
class RoutingVector {
public:
    static constexpr double kMinProbability = 1e-12;
    static constexpr double kSumTolerance = 1e-9;

    RoutingVector() = default;

    /// Validates `p`; renormalizes when the sum is within kSumTolerance of 1.
    explicit RoutingVector(std::vector<double> p);

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    std::span<const double> values() const { return p_; }
    const std::vector<double>& vector() const { return p_; }

    bool operator==(const RoutingVector&) const = default;

private:
    std::vector<double> p_;
};

RoutingVector uniform_routing(std::size_t n);

struct CentralServer {
    double mu_cs = 1.0;
    double p_cs = 0.0;

    bool operator==(const CentralServer&) const = default;
};

struct SystemConfig {
    std::vector<ClientProfile> clients;
    RoutingVector routing;
    int m = 1;
    std::optional<CentralServer> cs;

    std::size_t n() const { return clients.size(); }

    bool operator==(const SystemConfig&) const = default;
};

/// Throws ConfigError on any violated invariant.
void validate(const SystemConfig& config);

/// Throws ConfigError unless `config` carries a central-server block when
/// `model` is WithCS.
void require_model(const SystemConfig& config, Model model);

SystemConfig parse_system_config(std::string_view json_text);
SystemConfig load_system_config(const std::filesystem::path& path);
std::string to_json(const SystemConfig& config);

/// Smoothness / noise / dissimilarity constants of the learning problem.
/// The derived constants B and C are always recomputed from sigma, M and G.
class LearningConstants {
public:
    LearningConstants() = default;
    LearningConstants(double delta, double l_smooth, double sigma, double m_dissim, double g_bound);

    double delta() const { return delta_; }
    double l_smooth() const { return l_smooth_; }
    double sigma() const { return sigma_; }
    double m_dissim() const { return m_dissim_; }
    double g_bound() const { return g_bound_; }

    /// B = 6 (sigma^2 + 2 M^2)
    double b() const { return 6.0 * (sigma_ * sigma_ + 2.0 * m_dissim_ * m_dissim_); }
    /// C = 6 (sigma^2 + G^2)
    double c() const { return 6.0 * (sigma_ * sigma_ + g_bound_ * g_bound_); }

private:
    double delta_ = 1.0;
    double l_smooth_ = 1.0;
    double sigma_ = 0.0;
    double m_dissim_ = 0.0;
    double g_bound_ = 0.0;
};

} // namespace asyncfl
