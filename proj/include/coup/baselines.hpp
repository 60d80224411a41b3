#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "coup/engine.hpp"

namespace coup {

/// (epsilon_p, gamma_p) for phases p = 1, 2, ...
class PhaseSchedule {
public:
    /// epsilon_p = eps0 * ratio^(p-1), likewise for gamma; the default is 2^-p.
    PhaseSchedule(double eps1 = 0.5, double gamma1 = 0.5, double ratio = 0.5);

    double epsilon(long p) const;
    double gamma(long p) const;

private:
    double eps1_;
    double gamma1_;
    double ratio_;
};

/// ceil(ln(pi^2 p^2 / (3 delta)) / gamma_p).
long phase_config_count(long p, double gamma_p, double delta);

struct CoupV1Options {
    double delta = 0.01;
    double initial_captime = 1.0;
    PhaseSchedule schedule;
    /// 0 means no limit on the number of sampled configurations.
    std::size_t max_configs = 0;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// The phased procedure with Hoeffding-style bounds and max-UCB sampling. One
/// step pulls one arm; phase transitions happen at the start of a step.
class CoupV1 final : public Procedure {
public:
    CoupV1(ConfigurationSpace space, UtilityFunction u, const Runner& runner, CoupV1Options options);

    StepRecord step() override;
    GuaranteeReport guarantee() const override;
    const Configuration& recommend() const override;
    std::span<const ConfigState> states() const override { return states_; }
    long steps_taken() const override { return steps_; }
    nlohmann::json checkpoint() const override;
    void restore(const nlohmann::json& j) override;

    long phase() const { return phase_; }

    /// Bounds for the given statistics; clamped to [0,1].
    static void update_bounds(ConfigState& s, const UtilityFunction& u, std::size_t n, double delta);

private:
    void begin_phase();

    ConfigurationSpace space_;
    UtilityFunction u_;
    const Runner* runner_;
    CoupV1Options options_;
    Rng rng_;
    std::vector<ConfigState> states_;
    long phase_ = 0;
    long steps_ = 0;
    double target_time_ = 0.0;
    double wall_time_ = 0.0;
};

inline constexpr std::string_view kProcedureNames[] = {"coup-plus", "coup-plus-no-lucb", "coup-plus-hoeffding",
                                                       "coup-v1"};

bool is_procedure_name(std::string_view name);

/// Builds a procedure by name. coup-v1 takes delta, initial captime,
/// max_configs, seed and threads from `options`.
std::unique_ptr<Procedure> make_procedure(std::string_view name, const ConfigurationSpace& space,
                                          const UtilityFunction& u, const Runner& runner,
                                          const EngineOptions& options);

} // namespace coup
