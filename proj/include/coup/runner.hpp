#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coup/configspace.hpp"
#include "coup/utility.hpp"

namespace coup {

/// Outcome of one (configuration, instance, captime) execution. A censored
/// run reports runtime == captime; an uncensored one runtime < captime.
struct RunResult {
    double runtime = 0.0;
    bool censored = false;
    std::uint64_t instance_index = 0;
    ConfigId config_id = 0;
    bool crashed = false;
};

/// Raised when a target run cannot be carried out; carries the run identity.
class RunError : public std::runtime_error {
public:
    RunError(const std::string& what, ConfigId config_id, std::uint64_t instance_index)
        : std::runtime_error(what), config_id_(config_id), instance_index_(instance_index) {}

    ConfigId config_id() const { return config_id_; }
    std::uint64_t instance_index() const { return instance_index_; }

private:
    ConfigId config_id_;
    std::uint64_t instance_index_;
};

class Runner {
public:
    virtual ~Runner() = default;

    /// Must be safe to call concurrently for distinct (config, instance) pairs.
    virtual RunResult run(const Configuration& config, std::uint64_t instance_index, double captime) const = 0;

    /// When true, procedures account wall time as the simulated target time so
    /// that trajectories do not depend on the host machine.
    virtual bool simulated_clock() const { return false; }

    /// Exact mean utility of `config` when the runner knows its runtime law.
    virtual std::optional<double> true_utility(const Configuration&, const UtilityFunction&) const {
        return std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Simulated runtimes

struct ExponentialRuntime {
    double rate;
};
struct LognormalRuntime {
    double mu;
    double sigma;
};
struct FixedRuntime {
    double t;
};
using RuntimeDistribution = std::variant<ExponentialRuntime, LognormalRuntime, FixedRuntime>;

/// base + sum_k linear[k] x_k + sum_k quadratic[k] (x_k - center[k])^2 over a
/// normalized configuration vector x. Missing coefficients are zero.
struct ParamSurface {
    double base = 0.0;
    std::vector<double> linear;
    std::vector<double> quadratic;
    std::vector<double> center;

    double operator()(std::span<const double> x) const;
};

enum class RuntimeFamily { exponential, lognormal, fixed };

struct SimScenario {
    RuntimeFamily family = RuntimeFamily::exponential;
    /// exponential: "rate"; lognormal: "mu", "sigma"; fixed: "t".
    std::map<std::string, ParamSurface> params;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when the surfaces produce invalid
    /// parameters for this configuration.
    RuntimeDistribution distribution(std::span<const double> normalized) const;
};

/// Deterministic in (seed, config id, instance): the true runtime is drawn
/// once per pair, so raising the captime reveals the same runtime.
RunResult run_simulated(const SimScenario& scenario, const ConfigurationSpace& space, const Configuration& config,
                        std::uint64_t instance_index, double captime);

/// Exact E[u(T)] for T ~ dist (closed forms; quadrature for lognormal
/// runtimes under exponential utility).
double expected_utility(const RuntimeDistribution& dist, const UtilityFunction& u);

class SimRunner final : public Runner {
public:
    SimRunner(ConfigurationSpace space, SimScenario scenario);

    RunResult run(const Configuration& config, std::uint64_t instance_index, double captime) const override;
    bool simulated_clock() const override { return true; }
    std::optional<double> true_utility(const Configuration& config, const UtilityFunction& u) const override;

    const SimScenario& scenario() const { return scenario_; }

private:
    ConfigurationSpace space_;
    SimScenario scenario_;
};

// ---------------------------------------------------------------------------
// Subprocess targets

enum class CrashPolicy { censor, error };

struct SubprocessSpec {
    /// Whitespace-separated argv template; `{name}` expands to a parameter
    /// value and `{instance}` to the instance path. Single and double quotes
    /// group words. No shell is involved.
    std::string command;
    std::vector<std::string> instances;
    CrashPolicy crash_policy = CrashPolicy::censor;
    double grace_seconds = 2.0;
};

/// Renders the argv for one run. Throws std::invalid_argument on unknown
/// placeholders or unbalanced quotes.
std::vector<std::string> render_command(const SubprocessSpec& spec, const ConfigurationSpace& space,
                                        const Configuration& config, const std::string& instance_path);

/// Launches the rendered command and enforces the wall-clock captime
/// (SIGTERM at the cap, SIGKILL after the grace period). Spawn failures throw
/// RunError; crashes follow spec.crash_policy.
RunResult run_subprocess(const SubprocessSpec& spec, const ConfigurationSpace& space, const Configuration& config,
                         std::uint64_t instance_index, const std::string& instance_path, double captime);

inline constexpr double kMinSubprocessCaptime = 1.0;

class SubprocessRunner final : public Runner {
public:
    SubprocessRunner(ConfigurationSpace space, SubprocessSpec spec);

    /// Instances cycle when the index exceeds the list length.
    RunResult run(const Configuration& config, std::uint64_t instance_index, double captime) const override;

private:
    ConfigurationSpace space_;
    SubprocessSpec spec_;
};

/// Builds a runner from the scenario's runner object. `base_dir` resolves a
/// relative instance-list path; `default_seed` is used when the sim spec
/// has no seed of its own.
std::unique_ptr<Runner> runner_from_json(const ConfigurationSpace& space, const nlohmann::json& j,
                                         const std::string& base_dir, std::uint64_t default_seed);

} // namespace coup
