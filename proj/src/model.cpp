#include "asyncfl/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace asyncfl {

namespace {

using nlohmann::json;

void check_rate(double value, const char* name, std::size_t client) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        std::ostringstream os;
        os << "non-positive rate: " << name << " of client " << client << " is " << value;
        throw ConfigError(os.str());
    }
}

void check_power(double value, const char* name, std::size_t client) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        std::ostringstream os;
        os << "negative power: " << name << " of client " << client << " is " << value;
        throw ConfigError(os.str());
    }
}

double number_field(const json& obj, const char* key, std::optional<double> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (fallback) {
            return *fallback;
        }
        throw ConfigError(std::string("missing field \"") + key + "\"");
    }
    if (!it->is_number()) {
        throw ConfigError(std::string("field \"") + key + "\" must be a number");
    }
    return it->get<double>();
}

} // namespace

std::string_view to_string(Model model) {
    return model == Model::NoCS ? "nocs" : "cs";
}

Model parse_model(std::string_view text) {
    if (text == "nocs") {
        return Model::NoCS;
    }
    if (text == "cs") {
        return Model::WithCS;
    }
    throw ConfigError("unknown model \"" + std::string(text) + "\" (expected nocs or cs)");
}

RoutingVector::RoutingVector(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) {
        throw ConfigError("routing vector is empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
        if (!std::isfinite(p_[i]) || p_[i] <= 0.0) {
            std::ostringstream os;
            os << "routing entry " << i << " is " << p_[i] << " (must be > 0)";
            throw ConfigError(os.str());
        }
        if (p_[i] < kMinProbability) {
            std::ostringstream os;
            os << "routing entry " << i << " is " << p_[i] << " (below " << kMinProbability << ")";
            throw ConfigError(os.str());
        }
        sum += p_[i];
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "routing vector sums to " << sum << " (off by more than " << kSumTolerance << ")";
        throw ConfigError(os.str());
    }
    if (sum != 1.0) {
        for (double& v : p_) {
            v /= sum;
        }
    }
    for (double v : p_) {
        if (v > 1.0) {
            throw ConfigError("routing entry exceeds 1");
        }
    }
}

RoutingVector uniform_routing(std::size_t n) {
    if (n == 0) {
        throw ConfigError("uniform_routing needs at least one client");
    }
    return RoutingVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

void validate(const SystemConfig& config) {
    if (config.clients.empty()) {
        throw ConfigError("config has no clients");
    }
    for (std::size_t i = 0; i < config.clients.size(); ++i) {
        const auto& c = config.clients[i];
        check_rate(c.mu_d, "mu_d", i);
        check_rate(c.mu_c, "mu_c", i);
        check_rate(c.mu_u, "mu_u", i);
        check_power(c.p_d, "p_d", i);
        check_power(c.p_c, "p_c", i);
        check_power(c.p_u, "p_u", i);
    }
    if (config.routing.size() != config.clients.size()) {
        std::ostringstream os;
        os << "routing has " << config.routing.size() << " entries but there are " << config.clients.size()
           << " clients";
        throw ConfigError(os.str());
    }
    // Re-run the routing invariants; a default-constructed vector is empty.
    RoutingVector recheck(config.routing.vector());
    (void)recheck;
    if (config.m < 1) {
        throw ConfigError("concurrency m must be >= 1, got " + std::to_string(config.m));
    }
    if (config.cs) {
        if (!(config.cs->mu_cs > 0.0) || !std::isfinite(config.cs->mu_cs)) {
            throw ConfigError("non-positive rate: mu_cs");
        }
        if (!(config.cs->p_cs >= 0.0) || !std::isfinite(config.cs->p_cs)) {
            throw ConfigError("negative power: p_cs");
        }
    }
}

void require_model(const SystemConfig& config, Model model) {
    if (model == Model::WithCS && !config.cs) {
        throw ConfigError("model cs requested but the config has no \"cs\" block");
    }
}

SystemConfig parse_system_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("parse error: config must be a JSON object");
    }

    SystemConfig config;
    auto clients = doc.find("clients");
    if (clients == doc.end() || !clients->is_array()) {
        throw ConfigError("missing array field \"clients\"");
    }
    for (const auto& entry : *clients) {
        if (!entry.is_object()) {
            throw ConfigError("each client must be a JSON object");
        }
        ClientProfile c;
        c.mu_d = number_field(entry, "mu_d");
        c.mu_c = number_field(entry, "mu_c");
        c.mu_u = number_field(entry, "mu_u");
        c.p_d = number_field(entry, "p_d", 0.0);
        c.p_c = number_field(entry, "p_c", 0.0);
        c.p_u = number_field(entry, "p_u", 0.0);
        config.clients.push_back(c);
    }

    auto routing = doc.find("routing");
    if (routing == doc.end() || !routing->is_array()) {
        throw ConfigError("missing array field \"routing\"");
    }
    std::vector<double> p;
    for (const auto& v : *routing) {
        if (!v.is_number()) {
            throw ConfigError("routing entries must be numbers");
        }
        p.push_back(v.get<double>());
    }
    config.routing = RoutingVector(std::move(p));

    auto m = doc.find("m");
    if (m == doc.end() || !m->is_number_integer()) {
        throw ConfigError("missing integer field \"m\"");
    }
    auto m_value = m->get<long long>();
    if (m_value < 1 || m_value > 1'000'000) {
        throw ConfigError("concurrency m must be >= 1, got " + std::to_string(m_value));
    }
    config.m = static_cast<int>(m_value);

    auto cs = doc.find("cs");
    if (cs != doc.end() && !cs->is_null()) {
        if (!cs->is_object()) {
            throw ConfigError("\"cs\" must be an object or null");
        }
        config.cs = CentralServer{number_field(*cs, "mu_cs"), number_field(*cs, "p_cs", 0.0)};
    }

    validate(config);
    return config;
}

SystemConfig load_system_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_system_config(buffer.str());
}

std::string to_json(const SystemConfig& config) {
    json doc;
    doc["clients"] = json::array();
    for (const auto& c : config.clients) {
        doc["clients"].push_back(
            {{"mu_d", c.mu_d}, {"mu_c", c.mu_c}, {"mu_u", c.mu_u}, {"p_d", c.p_d}, {"p_c", c.p_c}, {"p_u", c.p_u}});
    }
    doc["routing"] = config.routing.vector();
    doc["m"] = config.m;
    if (config.cs) {
        doc["cs"] = {{"mu_cs", config.cs->mu_cs}, {"p_cs", config.cs->p_cs}};
    } else {
        doc["cs"] = nullptr;
    }
    return doc.dump(2);
}

LearningConstants::LearningConstants(double delta, double l_smooth, double sigma, double m_dissim, double g_bound)
    : delta_(delta), l_smooth_(l_smooth), sigma_(sigma), m_dissim_(m_dissim), g_bound_(g_bound) {
    if (!(delta >= 0.0) || !(l_smooth > 0.0) || !(sigma >= 0.0) || !(m_dissim >= 0.0) || !(g_bound >= 0.0)) {
        throw ConfigError("learning constants need delta >= 0, L > 0 and sigma, M, G >= 0");
    }
}

} // namespace asyncfl
