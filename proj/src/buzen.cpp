#include "asyncfl/buzen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "asyncfl/kernels.hpp"

namespace asyncfl {

namespace {

constexpr double kMantissaCeiling = 1e290;
constexpr int kMaxRescaleAttempts = 12;

struct StationLoads {
    std::vector<double> single;    // single-server stations, in recursion order
    std::vector<double> infinite;  // infinite-server stations, in recursion order
};

void check_inputs(std::span<const ClientProfile> profiles, std::span<const double> p, int m) {
    if (profiles.empty()) {
        throw std::invalid_argument("normalization constants need at least one client");
    }
    if (profiles.size() != p.size()) {
        throw std::invalid_argument("routing length does not match the number of clients");
    }
    if (m < 0) {
        throw std::invalid_argument("population must be non-negative");
    }
    for (double v : p) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("routing loads must be positive and finite");
        }
    }
}

StationLoads station_loads(std::span<const ClientProfile> profiles, std::span<const double> p,
                           std::optional<double> mu_cs) {
    StationLoads loads;
    if (mu_cs) {
        double total = std::accumulate(p.begin(), p.end(), 0.0);
        loads.single.push_back(total / *mu_cs);
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        loads.single.push_back(p[i] / profiles[i].mu_c);
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        loads.infinite.push_back(p[i] / profiles[i].mu_d);
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        loads.infinite.push_back(p[i] / profiles[i].mu_u);
    }
    return loads;
}

// One pass of the recursion with every load divided by `scale`.
std::vector<double> convolve(const StationLoads& loads, int m, double scale) {
    const auto len = static_cast<std::size_t>(m) + 1;
    std::vector<double> level(len, 0.0);
    level[0] = 1.0;

    for (double load : loads.single) {
        const double a = load / scale;
        for (std::size_t k = 1; k < len; ++k) {
            level[k] += a * level[k - 1];
        }
    }

    std::vector<double> weights(len);
    std::vector<double> reversed(len);
    for (double load : loads.infinite) {
        const double b = load / scale;
        weights[0] = 1.0;
        for (std::size_t k = 1; k < len; ++k) {
            weights[k] = weights[k - 1] * b / static_cast<double>(k);
        }
        std::reverse_copy(level.begin(), level.end(), reversed.begin());
        for (std::size_t k = 1; k < len; ++k) {
            // sum_{j=0..k} weights[j] * level[k - j]
            level[k] = kernels::dot(std::span<const double>(weights.data(), k + 1),
                                    std::span<const double>(reversed.data() + (len - 1 - k), k + 1));
        }
    }
    return level;
}

NormalizationTable build(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                         std::optional<double> mu_cs, Model variant) {
    check_inputs(profiles, p, m);
    if (mu_cs && (!(*mu_cs > 0.0) || !std::isfinite(*mu_cs))) {
        throw std::invalid_argument("mu_cs must be positive and finite");
    }
    const StationLoads loads = station_loads(profiles, p, mu_cs);

    // Dividing by the largest single-server load keeps every mantissa >= 1
    // (that station alone contributes 1 to each level) and every
    // queue-length tail probability ratio below 1.
    double log_scale = std::log(*std::max_element(loads.single.begin(), loads.single.end()));
    for (int attempt = 0; attempt < kMaxRescaleAttempts; ++attempt) {
        std::vector<double> level = convolve(loads, m, std::exp(log_scale));
        double peak = 0.0;
        bool finite = true;
        bool positive = true;
        for (double v : level) {
            finite = finite && std::isfinite(v);
            positive = positive && v > 0.0;
            peak = std::max(peak, v);
        }
        if (finite && positive && peak <= kMantissaCeiling) {
            return NormalizationTable(std::move(level), log_scale, variant);
        }
        if (finite && !positive) {
            break;
        }
        // Shift the scale so the largest level lands near 1e150.
        double excess = finite ? std::log(peak) - std::log(1e150) : 700.0;
        log_scale += std::max(excess, 1.0) / std::max(m, 1);
    }

    const double max_load = std::max(*std::max_element(loads.single.begin(), loads.single.end()),
                                     *std::max_element(loads.infinite.begin(), loads.infinite.end()));
    const double min_load = std::min(*std::min_element(loads.single.begin(), loads.single.end()),
                                     *std::min_element(loads.infinite.begin(), loads.infinite.end()));
    std::ostringstream os;
    os << "normalization constants overflow/underflow despite rescaling (population " << m << ", max load "
       << max_load << ", min load " << min_load << ")";
    throw NumericalError(os.str());
}

void enumerate(std::size_t dim, int remaining, double weight, std::span<const double> loads,
               std::span<const char> infinite_server, std::size_t& visited, std::size_t cap, double& total) {
    if (++visited > cap) {
        throw NumericalError("brute-force state space exceeds the cap");
    }
    if (dim + 1 == loads.size()) {
        double w = weight * std::pow(loads[dim], remaining);
        if (infinite_server[dim]) {
            w /= std::tgamma(static_cast<double>(remaining) + 1.0);
        }
        total += w;
        return;
    }
    double factor = 1.0;
    for (int x = 0; x <= remaining; ++x) {
        if (x > 0) {
            factor *= loads[dim];
            if (infinite_server[dim]) {
                factor /= static_cast<double>(x);
            }
        }
        enumerate(dim + 1, remaining - x, weight * factor, loads, infinite_server, visited, cap, total);
    }
}

} // namespace

NormalizationTable::NormalizationTable(std::vector<double> values, double log_scale, Model variant)
    : values_(std::move(values)), log_scale_(log_scale), scale_(std::exp(log_scale)), variant_(variant) {
    if (values_.empty()) {
        throw std::invalid_argument("normalization table needs at least level 0");
    }
}

double NormalizationTable::log_value(int k) const {
    double v = scaled(k);
    return v > 0.0 ? std::log(v) + k * log_scale_ : -std::numeric_limits<double>::infinity();
}

double NormalizationTable::value(int k) const {
    double v = scaled(k);
    if (v <= 0.0) {
        return 0.0;
    }
    double exponent = k * log_scale_;
    if (std::abs(exponent) < 600.0) {
        return v * std::exp(exponent);
    }
    return std::exp(std::log(v) + exponent);
}

double NormalizationTable::ratio(int k) const {
    if (k < 1 || k > population()) {
        throw std::out_of_range("ratio index outside 1..population");
    }
    return values_[static_cast<std::size_t>(k - 1)] / values_[static_cast<std::size_t>(k)] / scale_;
}

NormalizationTable normalization_constants(std::span<const ClientProfile> profiles, std::span<const double> p,
                                           int m) {
    return build(profiles, p, m, std::nullopt, Model::NoCS);
}

NormalizationTable normalization_constants_with_cs(std::span<const ClientProfile> profiles,
                                                   std::span<const double> p, int m, double mu_cs) {
    return build(profiles, p, m, mu_cs, Model::WithCS);
}

NormalizationTable normalization_constants(Model variant, std::span<const ClientProfile> profiles,
                                           std::span<const double> p, int m, std::optional<double> mu_cs) {
    if (variant == Model::NoCS) {
        return normalization_constants(profiles, p, m);
    }
    if (!mu_cs) {
        throw std::invalid_argument("WithCS normalization constants need mu_cs");
    }
    return normalization_constants_with_cs(profiles, p, m, *mu_cs);
}

std::size_t state_space_size(std::size_t dims, int k) {
    if (k < 0 || dims == 0) {
        return 0;
    }
    // C(dims + k - 1, k), built incrementally; every partial product is an
    // exact binomial coefficient.
    std::size_t result = 1;
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t j = 1; j <= kk; ++j) {
        std::size_t numerator = dims - 1 + j;
        if (result > std::numeric_limits<std::size_t>::max() / numerator) {
            return std::numeric_limits<std::size_t>::max();
        }
        result = result * numerator / j;
    }
    return result;
}

double brute_force_constant(std::span<const ClientProfile> profiles, std::span<const double> p, int k,
                            std::optional<double> mu_cs, std::size_t state_cap) {
    check_inputs(profiles, p, k);
    const StationLoads loads = station_loads(profiles, p, mu_cs);
    std::vector<double> all(loads.single);
    all.insert(all.end(), loads.infinite.begin(), loads.infinite.end());
    std::vector<char> infinite_server(all.size(), 0);
    std::fill(infinite_server.begin() + static_cast<std::ptrdiff_t>(loads.single.size()), infinite_server.end(), 1);

    if (state_space_size(all.size(), k) > state_cap) {
        throw NumericalError("brute-force state space exceeds the cap");
    }
    double total = 0.0;
    std::size_t visited = 0;
    enumerate(0, k, 1.0, all, infinite_server, visited, std::numeric_limits<std::size_t>::max(), total);
    return total;
}

} // namespace asyncfl
