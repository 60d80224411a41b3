#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coup/configspace.hpp"
#include "coup/random.hpp"
#include "coup/runner.hpp"
#include "coup/surrogate.hpp"
#include "coup/utility.hpp"

namespace coup {

struct RunRecord {
    double runtime = 0.0;
    bool censored = false;
};

struct ConfigState {
    Configuration config;
    long m = 0;
    double kappa = 1.0;
    double u_hat = 0.0;
    double f_hat = 0.0;
    double u_ucb = 1.0;
    double u_lcb = 0.0;
    double f_lcb = 0.0;
    double ucb = 1.0;
    double lcb = 0.0;
    /// runs[j] is instance j + 1, observed at the current kappa.
    std::vector<RunRecord> runs;
};

struct GuaranteeReport {
    double epsilon = 1.0;
    double gamma = 0.0;
    double delta = 0.0;
    ConfigId incumbent_id = 0;
    std::size_t n = 0;
    std::size_t n_prime = 0;
    double wall_time_spent = 0.0;
    double total_target_time = 0.0;
};

/// One line of the trajectory log.
struct StepRecord {
    long step = 0;
    double wall_time = 0.0;
    double target_time = 0.0;
    double epsilon = 1.0;
    double gamma = 0.0;
    ConfigId incumbent_id = 0;
    std::size_t n = 0;
    std::vector<ConfigId> arm_ids;
    std::vector<double> captimes;
};

nlohmann::json to_json(const StepRecord& r);
nlohmann::json to_json(const GuaranteeReport& r);

// ---------------------------------------------------------------------------
// Building blocks

/// Indices (into `states`) of the empirical leader and the highest-UCB
/// challenger among the others. Ties prefer fewer samples, then lower id.
/// With one state both indices are 0.
std::pair<std::size_t, std::size_t> select_arms(std::span<const ConfigState> states);

/// Index of the state with the largest UCB (same tie rule).
std::size_t select_max_ucb(std::span<const ConfigState> states);

/// Index of the state with the largest LCB; ties go to the lower id.
std::size_t select_incumbent(std::span<const ConfigState> states);

bool should_double_captime(const ConfigState& state, const UtilityFunction& u);

/// epsilon^2 < gamma (1 - max_ucb).
bool should_add_config(double epsilon, double gamma, double max_ucb);

std::size_t n_prime(std::size_t n, std::size_t n0);

/// (1/n') ln(pi^2 n'^2 / (3 delta)).
double gamma_for(std::size_t n_prime, double delta);

/// max UCB - max LCB, clamped at 0.
double epsilon_of(std::span<const ConfigState> states);

/// Recomputes u_hat and f_hat from the recorded runs at the state's kappa.
void recompute_statistics(ConfigState& state, const UtilityFunction& u);

enum class BoundKind { kl, hoeffding };

/// Refreshes u_ucb, u_lcb, f_lcb, ucb and lcb for a state with m >= 1 using
/// radius(n, m, kappa, delta).
void update_bounds(ConfigState& state, const UtilityFunction& u, std::size_t n, double delta, BoundKind kind);

// ---------------------------------------------------------------------------
// Procedures

/// A configuration procedure advanced one step at a time.
class Procedure {
public:
    virtual ~Procedure() = default;

    /// Runs one loop iteration. Runner failures propagate as RunError.
    virtual StepRecord step() = 0;
    virtual GuaranteeReport guarantee() const = 0;
    virtual const Configuration& recommend() const = 0;
    virtual std::span<const ConfigState> states() const = 0;
    virtual long steps_taken() const = 0;
    virtual nlohmann::json checkpoint() const = 0;
    virtual void restore(const nlohmann::json& j) = 0;
};

enum class Selection { lucb, max_ucb };

struct EngineOptions {
    double delta = 0.01;
    std::size_t n0 = 30;
    double initial_captime = 1.0;
    BoundKind bounds = BoundKind::kl;
    Selection selection = Selection::lucb;
    /// 0 means no limit. Once reached, no further configurations are added.
    std::size_t max_configs = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    ProposalParams proposal;
};

class Engine final : public Procedure {
public:
    /// Samples the n0 initial configurations. `runner` must outlive the engine.
    Engine(ConfigurationSpace space, UtilityFunction u, const Runner& runner, EngineOptions options);

    StepRecord step() override;
    GuaranteeReport guarantee() const override;
    const Configuration& recommend() const override;
    std::span<const ConfigState> states() const override { return states_; }
    long steps_taken() const override { return steps_; }
    nlohmann::json checkpoint() const override;
    void restore(const nlohmann::json& j) override;

    const EngineOptions& options() const { return options_; }

private:
    void add_config();
    void pull(std::span<const std::size_t> arms);

    ConfigurationSpace space_;
    UtilityFunction u_;
    const Runner* runner_;
    EngineOptions options_;
    Rng rng_;
    std::vector<ConfigState> states_;
    long steps_ = 0;
    double target_time_ = 0.0;
    double wall_time_ = 0.0;
};

/// Shared run bookkeeping: executes the planned (state, instance, captime)
/// runs, possibly in parallel, and returns results in plan order.
struct PlannedRun {
    std::size_t state_index;
    std::uint64_t instance;
    double captime;
};
std::vector<RunResult> execute_runs(const Runner& runner, std::span<const ConfigState> states,
                                    std::span<const PlannedRun> plan, int threads);

nlohmann::json state_to_json(const ConfigurationSpace& space, const ConfigState& s);
ConfigState state_from_json(const ConfigurationSpace& space, const nlohmann::json& j);
std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& s);

} // namespace coup
