#include "asyncfl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "asyncfl/buzen.hpp"

namespace asyncfl::oracle {

namespace {

enum class Kind { Single, Infinite, CsClass };

struct Station {
    std::size_t client;
    double load;
    Kind kind;
};

struct Walker {
    const std::vector<Station>& stations;
    std::size_t n;
    std::vector<int> occupancy;  // per client
    int cs_total = 0;
    double z = 0.0;
    std::vector<double> first;
    std::vector<double> second;
    std::size_t states = 0;

    void leaf(double weight) {
        double w = weight;
        for (int k = 2; k <= cs_total; ++k) {
            w *= k;  // multinomial numerator K!
        }
        ++states;
        z += w;
        for (std::size_t i = 0; i < n; ++i) {
            first[i] += w * occupancy[i];
            for (std::size_t j = 0; j < n; ++j) {
                second[i * n + j] += w * occupancy[i] * occupancy[j];
            }
        }
    }

    void visit(std::size_t index, int remaining, double weight) {
        const Station& st = stations[index];
        const bool last = index + 1 == stations.size();
        const int lo = last ? remaining : 0;
        double factor = 1.0;
        for (int x = 0; x < lo; ++x) {
            factor *= st.load;
            if (st.kind != Kind::Single) {
                factor /= (x + 1);
            }
        }
        for (int x = lo; x <= remaining; ++x) {
            if (x > lo) {
                factor *= st.load;
                if (st.kind != Kind::Single) {
                    factor /= x;
                }
            }
            occupancy[st.client] += x;
            if (st.kind == Kind::CsClass) {
                cs_total += x;
            }
            if (last) {
                leaf(weight * factor);
            } else {
                visit(index + 1, remaining - x, weight * factor);
            }
            occupancy[st.client] -= x;
            if (st.kind == Kind::CsClass) {
                cs_total -= x;
            }
        }
    }
};

std::string format_error(double err) {
    std::ostringstream os;
    os.precision(3);
    os << err;
    return os.str();
}

} // namespace

EnumeratedMoments enumerate_moments(std::span<const ClientProfile> profiles, std::span<const double> p,
                                    int population, std::optional<double> mu_cs, std::size_t state_cap) {
    if (profiles.empty() || profiles.size() != p.size()) {
        throw std::invalid_argument("enumeration needs matching, non-empty profiles and routing");
    }
    if (population < 0) {
        throw std::invalid_argument("population must be non-negative");
    }
    const std::size_t n = profiles.size();
    std::vector<Station> stations;
    for (std::size_t i = 0; i < n; ++i) {
        stations.push_back({i, p[i] / profiles[i].mu_d, Kind::Infinite});
        stations.push_back({i, p[i] / profiles[i].mu_c, Kind::Single});
        stations.push_back({i, p[i] / profiles[i].mu_u, Kind::Infinite});
        if (mu_cs) {
            stations.push_back({i, p[i] / *mu_cs, Kind::CsClass});
        }
    }
    if (state_space_size(stations.size(), population) > state_cap) {
        throw NumericalError("enumeration state space exceeds the cap");
    }

    Walker walker{stations, n, std::vector<int>(n, 0), 0, 0.0, std::vector<double>(n, 0.0),
                  std::vector<double>(n * n, 0.0), 0};
    walker.visit(0, population, 1.0);

    EnumeratedMoments out;
    out.z = walker.z;
    out.states = walker.states;
    out.mean.resize(n);
    out.second = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out.mean[i] = walker.first[i] / walker.z;
        for (std::size_t j = 0; j < n; ++j) {
            out.second(i, j) = walker.second[i * n + j] / walker.z;
        }
    }
    return out;
}

std::vector<double> delays(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                           std::optional<double> mu_cs) {
    return enumerate_moments(profiles, p, m - 1, mu_cs).mean;
}

Matrix jacobian(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                std::optional<double> mu_cs) {
    const EnumeratedMoments mom = enumerate_moments(profiles, p, m - 1, mu_cs);
    const std::size_t n = p.size();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = (mom.second(i, j) - mom.mean[i] * mom.mean[j]) / p[j];
        }
    }
    return out;
}

double throughput(std::span<const ClientProfile> profiles, std::span<const double> p, int m,
                  std::optional<double> mu_cs) {
    return enumerate_moments(profiles, p, m - 1, mu_cs).z / enumerate_moments(profiles, p, m, mu_cs).z;
}

Matrix finite_difference_jacobian(const VectorFn& f, std::span<const double> x, double h) {
    std::vector<double> point(x.begin(), x.end());
    const std::size_t rows = f(point).size();
    Matrix out(rows, x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        point[j] = x[j] + h;
        const std::vector<double> up = f(point);
        point[j] = x[j] - h;
        const std::vector<double> down = f(point);
        point[j] = x[j];
        for (std::size_t i = 0; i < rows; ++i) {
            out(i, j) = (up[i] - down[i]) / (2.0 * h);
        }
    }
    return out;
}

std::vector<double> finite_difference_gradient(const ScalarFn& f, std::span<const double> x, double h) {
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        point[j] = x[j] + h;
        const double up = f(point);
        point[j] = x[j] - h;
        const double down = f(point);
        point[j] = x[j];
        out[j] = (up - down) / (2.0 * h);
    }
    return out;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("max_relative_error: length mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
    }
    return worst;
}

std::vector<SuiteResult> run_oracle_suites(const SystemConfig& config) {
    validate(config);
    const std::span<const ClientProfile> clients = config.clients;
    const std::vector<double> p = config.routing.vector();
    const std::size_t n = p.size();
    const double mu_cs = config.cs ? config.cs->mu_cs : 1.0;

    // Keep every enumeration affordable: shrink m until the largest state
    // space (4n stations at population m) fits.
    int m = config.m;
    while (m > 1 && state_space_size(4 * n, m) > 200'000) {
        --m;
    }
    std::string note = m == config.m ? "" : " (m reduced to " + std::to_string(m) + " for enumeration)";

    const NetworkInputs nocs{clients, p, std::nullopt};
    auto closed_delays = [&](std::span<const double> q, std::optional<double> cs) {
        NetworkInputs net{clients, q, cs};
        return asyncfl::delays(normalization_constants(net.model(), clients, q, m, cs), net, m);
    };

    std::vector<SuiteResult> out;
    auto record = [&](std::string name, double err, double tol) {
        bool ok = std::isfinite(err) && err <= tol;
        out.push_back({std::move(name), ok, "max relative error " + format_error(err) + note});
    };

    // 1. Convolution against direct summation, both variants.
    {
        double err = 0.0;
        const NormalizationTable z = normalization_constants(clients, p, m);
        const NormalizationTable w = normalization_constants_with_cs(clients, p, m, mu_cs);
        for (int k = 0; k <= m; ++k) {
            const double bz = brute_force_constant(clients, p, k);
            const double bw = brute_force_constant(clients, p, k, mu_cs);
            err = std::max(err, std::abs(z.value(k) - bz) / bz);
            err = std::max(err, std::abs(w.value(k) - bw) / bw);
        }
        record("normalization constants vs brute force", err, 1e-10);
    }
    // 2. Delays against enumerated means.
    {
        const std::vector<double> ref = delays(clients, p, m);
        const std::vector<double> got = closed_delays(p, std::nullopt);
        double total = std::accumulate(got.begin(), got.end(), 0.0);
        double err = std::max(max_relative_error(got, ref, 1e-12), std::abs(total - (m - 1)) / std::max(1, m - 1));
        record("expected delays vs enumeration", err, 1e-9);
    }
    // 3. Jacobian against enumerated covariances.
    const NormalizationTable table = normalization_constants(clients, p, m);
    const Matrix jac = asyncfl::jacobian(table, nocs, m);
    {
        const Matrix ref = jacobian(clients, p, m);
        double scale = 0.0;
        for (double v : ref.data) {
            scale = std::max(scale, std::abs(v));
        }
        double err = 0.0;
        for (std::size_t k = 0; k < ref.data.size(); ++k) {
            err = std::max(err, std::abs(jac.data[k] - ref.data[k]) / std::max(scale, 1e-12));
        }
        record("delay Jacobian vs enumerated covariance", err, 1e-9);
    }
    // 4. Jacobian against finite differences of the closed-form delays.
    {
        const Matrix fd =
            finite_difference_jacobian([&](std::span<const double> q) { return closed_delays(q, std::nullopt); }, p);
        double scale = 0.0;
        for (double v : fd.data) {
            scale = std::max(scale, std::abs(v));
        }
        double err = 0.0;
        for (std::size_t k = 0; k < fd.data.size(); ++k) {
            err = std::max(err, std::abs(jac.data[k] - fd.data[k]) / std::max(scale, 1e-12));
        }
        record("delay Jacobian vs finite differences", err, 1e-5);
    }
    // 5. Throughput and its gradient.
    {
        const double lambda = asyncfl::throughput(table);
        const double ref = throughput(clients, p, m);
        const std::vector<double> grad = throughput_gradient(table, nocs, m);
        const std::vector<double> fd = finite_difference_gradient(
            [&](std::span<const double> q) { return asyncfl::throughput(normalization_constants(clients, q, m)); }, p);
        double euler = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            euler += p[j] * grad[j];
        }
        double err = std::abs(lambda - ref) / ref;
        err = std::max(err, max_relative_error(grad, fd, 1e-6 * lambda));
        err = std::max(err, std::abs(euler + lambda) / lambda);
        record("throughput and gradient vs enumeration and finite differences", err, 1e-5);
    }
    // 6. Central-server model: enumeration with per-class counts, and the
    // infinitely fast server limit.
    {
        const std::vector<double> got = closed_delays(p, mu_cs);
        double err = max_relative_error(got, delays(clients, p, m, mu_cs), 1e-12);
        NetworkInputs cs_net{clients, p, mu_cs};
        const NormalizationTable w = normalization_constants_with_cs(clients, p, m, mu_cs);
        const Matrix jw = asyncfl::jacobian(w, cs_net, m);
        const Matrix ref = jacobian(clients, p, m, mu_cs);
        double scale = 0.0;
        for (double v : ref.data) {
            scale = std::max(scale, std::abs(v));
        }
        for (std::size_t k = 0; k < ref.data.size(); ++k) {
            err = std::max(err, std::abs(jw.data[k] - ref.data[k]) / std::max(scale, 1e-12));
        }
        err = std::max(err, std::abs(asyncfl::throughput(w) - throughput(clients, p, m, mu_cs)) /
                                throughput(clients, p, m, mu_cs));
        const std::vector<double> limit = closed_delays(p, 1e9);
        err = std::max(err, max_relative_error(limit, closed_delays(p, std::nullopt), 1e-9));
        record("central-server model vs enumeration and fast-server limit", err, 1e-6);
    }
    return out;
}

} // namespace asyncfl::oracle
