#pragma once

// Normalization constants of the closed product-form network by Buzen's
// convolution recursion.
//
// Station order: [central-server queue,] n single-server compute stations,
// n infinite-server downlink stations, n infinite-server uplink stations.
// A single-server station with load a contributes the geometric series
// sum_k a^k; an infinite-server station with load b contributes b^k / k!.
//
// With a central-server queue the per-class factors aggregate (multinomial
// theorem) into one single-server station with load (sum_i p_i) / mu_cs.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "asyncfl/model.hpp"

namespace asyncfl {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Z_{n,k} (or W_{n,k}) for k = 0..population, stored as mantissas with a
/// shared scale: Z_k = values[k] * exp(k * log_scale). Because Z is
/// homogeneous of degree k in the loads, the mantissas are exactly the
/// constants of the network with every load divided by exp(log_scale).
class NormalizationTable {
public:
    NormalizationTable(std::vector<double> values, double log_scale, Model variant);

    int population() const { return static_cast<int>(values_.size()) - 1; }
    Model variant() const { return variant_; }
    double log_scale() const { return log_scale_; }
    double scale() const { return scale_; }
    std::span<const double> values() const { return values_; }

    /// Mantissa of level k; zero for k < 0 or k > population().
    double scaled(int k) const {
        return (k < 0 || k > population()) ? 0.0 : values_[static_cast<std::size_t>(k)];
    }
    /// log Z_k.
    double log_value(int k) const;
    /// Z_k itself; may overflow for large populations.
    double value(int k) const;
    /// Z_{k-1} / Z_k for 1 <= k <= population().
    double ratio(int k) const;

private:
    std::vector<double> values_;
    double log_scale_;
    double scale_;
    Model variant_;
};

NormalizationTable normalization_constants(std::span<const ClientProfile> profiles, std::span<const double> p,
                                           int m);

NormalizationTable normalization_constants_with_cs(std::span<const ClientProfile> profiles,
                                                   std::span<const double> p, int m, double mu_cs);

/// Dispatches on `variant`; mu_cs is required for WithCS.
NormalizationTable normalization_constants(Model variant, std::span<const ClientProfile> profiles,
                                           std::span<const double> p, int m, std::optional<double> mu_cs);

/// Direct summation of the product-form weights over every state of the
/// population-k state space (3n stations, plus the aggregated central-server
/// queue when mu_cs is given). Throws NumericalError when the number of
/// states exceeds `state_cap`.
double brute_force_constant(std::span<const ClientProfile> profiles, std::span<const double> p, int k,
                            std::optional<double> mu_cs = std::nullopt, std::size_t state_cap = 2'000'000);

/// Number of non-negative integer vectors of length `dims` summing to k,
/// saturating at SIZE_MAX.
std::size_t state_space_size(std::size_t dims, int k);

} // namespace asyncfl
