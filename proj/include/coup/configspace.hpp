#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coup/random.hpp"

namespace coup {

struct Categorical {
    std::vector<std::string> values;
};

struct Continuous {
    double lower = 0.0;
    double upper = 1.0;
    bool log_scale = false;
};

struct ParameterDef {
    std::string name;
    std::variant<Categorical, Continuous> kind;

    bool is_categorical() const { return std::holds_alternative<Categorical>(kind); }
};

enum class Provenance { random, model };

using ConfigId = std::uint64_t;

/// A concrete parameter assignment. `values` holds one entry per parameter in
/// native units: the real value for continuous parameters and the value index
/// for categorical ones. Ids are stamped by the procedure that samples them.
struct Configuration {
    ConfigId id = 0;
    std::vector<double> values;
    Provenance provenance = Provenance::random;
};

/// True when both configurations assign identical parameter values.
bool same_values(const Configuration& a, const Configuration& b);

class ConfigurationSpace {
public:
    /// Throws std::invalid_argument on an empty list, duplicate names, bad
    /// bounds, or categorical lists that are empty or contain duplicates.
    explicit ConfigurationSpace(std::vector<ParameterDef> params);

    std::span<const ParameterDef> params() const { return params_; }
    std::size_t size() const { return params_.size(); }

    /// Length of the normalized encoding (one slot per continuous parameter,
    /// one per categorical value).
    std::size_t encoded_size() const { return encoded_size_; }

    /// Throws std::invalid_argument when `config` does not belong to the space.
    void validate(const Configuration& config) const;

    /// Human-readable value of parameter `index` (categorical label or number).
    std::string render_value(const Configuration& config, std::size_t index) const;

private:
    std::vector<ParameterDef> params_;
    std::size_t encoded_size_ = 0;
};

/// Independent uniform draw per parameter (log-uniform for log-scale ones).
Configuration sample_random(const ConfigurationSpace& space, Rng& rng);

/// Continuous parameters map (log-)affinely to [0,1]; categoricals become
/// one-hot blocks.
std::vector<double> normalize(const ConfigurationSpace& space, const Configuration& config);

/// Inverse of normalize. One-hot blocks decode to their arg-max.
Configuration denormalize(const ConfigurationSpace& space, std::span<const double> encoded);

/// One-exchange neighborhood for categoricals; four truncated-Gaussian
/// (sd 0.2 in normalized units) moves per continuous parameter. Each neighbor
/// differs from `config` in exactly one parameter and keeps its id and
/// provenance.
std::vector<Configuration> neighbors(const ConfigurationSpace& space, const Configuration& config, Rng& rng);

inline constexpr int kContinuousNeighbors = 4;
inline constexpr double kNeighborStddev = 0.2;

// Serialization.
nlohmann::json space_to_json(const ConfigurationSpace& space);
ConfigurationSpace space_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ConfigurationSpace& space, const Configuration& config);
Configuration config_from_json(const ConfigurationSpace& space, const nlohmann::json& j);

std::string_view to_string(Provenance p);

} // namespace coup
