#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coup/baselines.hpp"
#include "coup/configspace.hpp"
#include "coup/engine.hpp"
#include "coup/runner.hpp"
#include "coup/utility.hpp"

namespace coup {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitExecution = 3;

/// Stopping rules; the procedure stops as soon as any set limit is reached.
struct Budgets {
    std::optional<double> wall_seconds;
    std::optional<double> target_seconds;
    std::optional<long> max_steps;
    /// Both targets must be met together.
    std::optional<double> epsilon_target;
    std::optional<double> gamma_target;

    bool bounded() const { return wall_seconds || target_seconds || max_steps; }
};

struct Scenario {
    ConfigurationSpace space;
    UtilityFunction utility;
    EngineOptions engine;
    Budgets budgets;
    std::string procedure = "coup-plus";
    nlohmann::json runner;
    /// Directory of the scenario file; relative paths resolve against it.
    std::string base_dir;
};

/// Throws std::invalid_argument (or a JSON error) for malformed scenarios.
Scenario parse_scenario(const nlohmann::json& j, const std::string& base_dir);
Scenario load_scenario(const std::string& path);

/// Runner for a scenario; the sim seed defaults to `seed`.
std::unique_ptr<Runner> make_runner(const Scenario& s, std::uint64_t seed);

/// Empty when no limit is reached, else a short reason.
std::string stop_reason(const Budgets& b, const StepRecord& last);

struct ConfigureOptions {
    std::string scenario;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> procedure;
    std::optional<double> budget_wall;
    std::optional<long> budget_steps;
    std::optional<int> threads;
    /// Checkpoint to continue from.
    std::optional<std::string> resume;
    long checkpoint_every = 100;
};

/// Writes trajectory.jsonl, checkpoint.json, report.json and incumbents.json.
int cmd_configure(const ConfigureOptions& o);

struct AnalyzeOptions {
    std::string csv;
    std::string out_dir;
    std::vector<std::string> utilities;
    /// Each sweep pairs with the grid at the same position.
    std::vector<std::string> sweeps;
    std::vector<std::string> grids;
    /// <= 0 uses the largest runtime in the table.
    double cap = 0.0;
};

/// Writes fosd_matrix.csv, expected_utility.csv, regret_<k>.csv,
/// rankings_<k>.csv, l1_<k>.csv, l1_utilities.csv and metadata.json.
int cmd_analyze(const AnalyzeOptions& o);

struct AblateOptions {
    std::string scenario;
    std::string out_dir;
    std::vector<std::string> procedures;
    std::vector<std::uint64_t> seeds;
    long checkpoint_every = 100;
    std::optional<double> budget_wall;
    std::optional<long> budget_steps;
    std::optional<int> threads;
};

/// Writes ablation.csv in long format.
int cmd_ablate(const AblateOptions& o);

struct ValidateOptions {
    std::string configs;
    std::string scenario;
    long instances = 0;
    std::optional<double> captime;
    std::optional<std::uint64_t> seed;
    /// Empty prints the CSV to stdout.
    std::string out_dir;
};

/// Runs each configuration on instances offset by kValidationOffset.
int cmd_validate(const ValidateOptions& o);

inline constexpr std::uint64_t kValidationOffset = 1000000;

/// Reads configurations saved by configure: report.json, incumbents.json, a
/// bare list, or a single configuration object.
std::vector<Configuration> load_configurations(const ConfigurationSpace& space, const nlohmann::json& j);

} // namespace coup
