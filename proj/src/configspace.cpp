#include "coup/configspace.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace coup {
namespace {

constexpr int kTruncationAttempts = 10000;

double to_unit(const Continuous& c, double value) {
    if (c.log_scale) return (std::log(value) - std::log(c.lower)) / (std::log(c.upper) - std::log(c.lower));
    return (value - c.lower) / (c.upper - c.lower);
}

double from_unit(const Continuous& c, double x) {
    x = std::clamp(x, 0.0, 1.0);
    double value = c.log_scale ? std::exp(std::log(c.lower) + x * (std::log(c.upper) - std::log(c.lower)))
                               : c.lower + x * (c.upper - c.lower);
    return std::clamp(value, c.lower, c.upper);
}

double truncated_gaussian(double mean, Rng& rng) {
    std::normal_distribution<double> normal(mean, kNeighborStddev);
    for (int attempt = 0; attempt < kTruncationAttempts; ++attempt) {
        const double x = normal(rng);
        if (x >= 0.0 && x <= 1.0) return x;
    }
    return std::clamp(normal(rng), 0.0, 1.0);
}

} // namespace

bool same_values(const Configuration& a, const Configuration& b) { return a.values == b.values; }

ConfigurationSpace::ConfigurationSpace(std::vector<ParameterDef> params) : params_(std::move(params)) {
    if (params_.empty()) throw std::invalid_argument("configuration space must have at least one parameter");
    std::set<std::string> names;
    for (const auto& p : params_) {
        if (p.name.empty()) throw std::invalid_argument("parameter names must be non-empty");
        if (!names.insert(p.name).second) throw std::invalid_argument(fmt::format("duplicate parameter '{}'", p.name));
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            if (cat->values.empty()) {
                throw std::invalid_argument(fmt::format("categorical '{}' has no values", p.name));
            }
            std::set<std::string> seen(cat->values.begin(), cat->values.end());
            if (seen.size() != cat->values.size()) {
                throw std::invalid_argument(fmt::format("categorical '{}' has duplicate values", p.name));
            }
            encoded_size_ += cat->values.size();
        } else {
            const auto& c = std::get<Continuous>(p.kind);
            if (!std::isfinite(c.lower) || !std::isfinite(c.upper) || !(c.lower < c.upper)) {
                throw std::invalid_argument(fmt::format("continuous '{}' needs finite lower < upper", p.name));
            }
            if (c.log_scale && !(c.lower > 0.0)) {
                throw std::invalid_argument(fmt::format("log-scale '{}' needs lower > 0", p.name));
            }
            encoded_size_ += 1;
        }
    }
}

void ConfigurationSpace::validate(const Configuration& config) const {
    if (config.values.size() != params_.size()) {
        throw std::invalid_argument(
            fmt::format("configuration {} has {} values, space has {}", config.id, config.values.size(), params_.size()));
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
        const double v = config.values[k];
        if (const auto* cat = std::get_if<Categorical>(&params_[k].kind)) {
            if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(cat->values.size())) {
                throw std::invalid_argument(fmt::format("'{}': {} is not a valid value index", params_[k].name, v));
            }
        } else {
            const auto& c = std::get<Continuous>(params_[k].kind);
            if (!(v >= c.lower && v <= c.upper)) {
                throw std::invalid_argument(
                    fmt::format("'{}': {} outside [{}, {}]", params_[k].name, v, c.lower, c.upper));
            }
        }
    }
}

std::string ConfigurationSpace::render_value(const Configuration& config, std::size_t index) const {
    const double v = config.values.at(index);
    if (const auto* cat = std::get_if<Categorical>(&params_.at(index).kind)) {
        return cat->values.at(static_cast<std::size_t>(v));
    }
    return fmt::format("{}", v);
}

Configuration sample_random(const ConfigurationSpace& space, Rng& rng) {
    Configuration config;
    config.values.reserve(space.size());
    for (const auto& p : space.params()) {
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            std::uniform_int_distribution<std::size_t> pick(0, cat->values.size() - 1);
            config.values.push_back(static_cast<double>(pick(rng)));
        } else {
            const auto& c = std::get<Continuous>(p.kind);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            config.values.push_back(from_unit(c, unit(rng)));
        }
    }
    return config;
}

std::vector<double> normalize(const ConfigurationSpace& space, const Configuration& config) {
    space.validate(config);
    std::vector<double> out;
    out.reserve(space.encoded_size());
    for (std::size_t k = 0; k < space.size(); ++k) {
        const auto& p = space.params()[k];
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            const auto chosen = static_cast<std::size_t>(config.values[k]);
            for (std::size_t j = 0; j < cat->values.size(); ++j) out.push_back(j == chosen ? 1.0 : 0.0);
        } else {
            out.push_back(std::clamp(to_unit(std::get<Continuous>(p.kind), config.values[k]), 0.0, 1.0));
        }
    }
    return out;
}

Configuration denormalize(const ConfigurationSpace& space, std::span<const double> encoded) {
    if (encoded.size() != space.encoded_size()) {
        throw std::invalid_argument("encoded vector length does not match the space");
    }
    Configuration config;
    std::size_t pos = 0;
    for (const auto& p : space.params()) {
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            const auto block = encoded.subspan(pos, cat->values.size());
            const auto best = std::max_element(block.begin(), block.end()) - block.begin();
            config.values.push_back(static_cast<double>(best));
            pos += cat->values.size();
        } else {
            config.values.push_back(from_unit(std::get<Continuous>(p.kind), encoded[pos]));
            pos += 1;
        }
    }
    return config;
}

std::vector<Configuration> neighbors(const ConfigurationSpace& space, const Configuration& config, Rng& rng) {
    space.validate(config);
    std::vector<Configuration> out;
    for (std::size_t k = 0; k < space.size(); ++k) {
        const auto& p = space.params()[k];
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            for (std::size_t j = 0; j < cat->values.size(); ++j) {
                if (static_cast<double>(j) == config.values[k]) continue;
                Configuration next = config;
                next.values[k] = static_cast<double>(j);
                out.push_back(std::move(next));
            }
        } else {
            const auto& c = std::get<Continuous>(p.kind);
            const double mean = std::clamp(to_unit(c, config.values[k]), 0.0, 1.0);
            for (int draw = 0; draw < kContinuousNeighbors; ++draw) {
                Configuration next = config;
                next.values[k] = from_unit(c, truncated_gaussian(mean, rng));
                out.push_back(std::move(next));
            }
        }
    }
    return out;
}

std::string_view to_string(Provenance p) { return p == Provenance::model ? "model" : "random"; }

nlohmann::json space_to_json(const ConfigurationSpace& space) {
    auto out = nlohmann::json::array();
    for (const auto& p : space.params()) {
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            out.push_back({{"name", p.name}, {"kind", "categorical"}, {"values", cat->values}});
        } else {
            const auto& c = std::get<Continuous>(p.kind);
            out.push_back(
                {{"name", p.name}, {"kind", "continuous"}, {"lower", c.lower}, {"upper", c.upper}, {"log", c.log_scale}});
        }
    }
    return out;
}

ConfigurationSpace space_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("space must be a JSON array");
    std::vector<ParameterDef> params;
    for (const auto& entry : j) {
        ParameterDef def;
        def.name = entry.at("name").get<std::string>();
        const auto kind = entry.at("kind").get<std::string>();
        if (kind == "categorical") {
            def.kind = Categorical{entry.at("values").get<std::vector<std::string>>()};
        } else if (kind == "continuous") {
            def.kind = Continuous{entry.at("lower").get<double>(), entry.at("upper").get<double>(),
                                  entry.value("log", false)};
        } else {
            throw std::invalid_argument(fmt::format("parameter '{}': unknown kind '{}'", def.name, kind));
        }
        params.push_back(std::move(def));
    }
    return ConfigurationSpace(std::move(params));
}

nlohmann::json config_to_json(const ConfigurationSpace& space, const Configuration& config) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t k = 0; k < space.size(); ++k) {
        const auto& p = space.params()[k];
        if (p.is_categorical()) {
            values[p.name] = space.render_value(config, k);
        } else {
            values[p.name] = config.values[k];
        }
    }
    return {{"id", config.id}, {"provenance", std::string(to_string(config.provenance))}, {"values", values}};
}

Configuration config_from_json(const ConfigurationSpace& space, const nlohmann::json& j) {
    Configuration config;
    config.id = j.at("id").get<ConfigId>();
    const auto provenance = j.value("provenance", std::string("random"));
    if (provenance != "random" && provenance != "model") {
        throw std::invalid_argument(fmt::format("unknown provenance '{}'", provenance));
    }
    config.provenance = provenance == "model" ? Provenance::model : Provenance::random;
    const auto& values = j.at("values");
    for (const auto& p : space.params()) {
        const auto& v = values.at(p.name);
        if (const auto* cat = std::get_if<Categorical>(&p.kind)) {
            const auto label = v.get<std::string>();
            const auto it = std::find(cat->values.begin(), cat->values.end(), label);
            if (it == cat->values.end()) {
                throw std::invalid_argument(fmt::format("'{}': unknown value '{}'", p.name, label));
            }
            config.values.push_back(static_cast<double>(it - cat->values.begin()));
        } else {
            config.values.push_back(v.get<double>());
        }
    }
    space.validate(config);
    return config;
}

} // namespace coup
