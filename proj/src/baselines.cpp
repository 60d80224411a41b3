#include "coup/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "coup/bounds.hpp"

namespace coup {

PhaseSchedule::PhaseSchedule(double eps1, double gamma1, double ratio) : eps1_(eps1), gamma1_(gamma1), ratio_(ratio) {
    if (!(eps1 > 0.0 && eps1 < 1.0) || !(gamma1 > 0.0 && gamma1 < 1.0))
        throw std::invalid_argument("phase parameters must lie in (0,1)");
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("phase ratio must lie in (0,1)");
}

double PhaseSchedule::epsilon(long p) const {
    if (p < 1) throw std::invalid_argument("phases start at 1");
    return eps1_ * std::pow(ratio_, static_cast<double>(p - 1));
}

double PhaseSchedule::gamma(long p) const {
    if (p < 1) throw std::invalid_argument("phases start at 1");
    return gamma1_ * std::pow(ratio_, static_cast<double>(p - 1));
}

long phase_config_count(long p, double gamma_p, double delta) {
    if (p < 1) throw std::invalid_argument("phases start at 1");
    if (!(gamma_p > 0.0)) throw std::invalid_argument("gamma_p must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    const double pp = static_cast<double>(p);
    const double n = std::ceil(std::log(std::numbers::pi * std::numbers::pi * pp * pp / (3.0 * delta)) / gamma_p);
    if (!(n < 1e15)) throw std::overflow_error("phase configuration count is out of range");
    return std::max(0L, static_cast<long>(n));
}

CoupV1::CoupV1(ConfigurationSpace space, UtilityFunction u, const Runner& runner, CoupV1Options options)
    : space_(std::move(space)), u_(std::move(u)), runner_(&runner), options_(std::move(options)), rng_(options_.seed) {
    if (!(options_.delta > 0.0 && options_.delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (!(options_.initial_captime > 0.0)) throw std::invalid_argument("initial captime must be positive");
    begin_phase();
}

void CoupV1::update_bounds(ConfigState& s, const UtilityFunction& u, std::size_t n, double delta) {
    if (s.m < 1) {
        s.ucb = 1.0;
        s.lcb = 0.0;
        return;
    }
    const double alpha = hoeffding_radius(radius(static_cast<long>(n), s.m, s.kappa, delta));
    const double uk = evaluate(u, s.kappa);
    s.u_ucb = std::min(1.0, s.u_hat + alpha);
    s.u_lcb = std::max(0.0, s.u_hat - alpha);
    s.f_lcb = std::max(0.0, s.f_hat - alpha);
    s.ucb = std::clamp(s.u_hat + (1.0 - uk) * alpha, 0.0, 1.0);
    s.lcb = std::clamp(s.u_hat - alpha - uk * (1.0 - s.f_hat), 0.0, 1.0);
}

void CoupV1::begin_phase() {
    ++phase_;
    auto target = static_cast<std::size_t>(phase_config_count(phase_, options_.schedule.gamma(phase_), options_.delta));
    if (options_.max_configs != 0) target = std::min(target, options_.max_configs);
    target = std::max<std::size_t>(target, 1);
    while (states_.size() < target) {
        ConfigState s;
        s.config = sample_random(space_, rng_);
        s.config.id = states_.size();
        s.config.provenance = Provenance::random;
        s.kappa = options_.initial_captime;
        states_.push_back(std::move(s));
    }
    for (auto& s : states_) update_bounds(s, u_, states_.size(), options_.delta);
    spdlog::debug("phase {} with {} configurations", phase_, states_.size());
}

StepRecord CoupV1::step() {
    const auto start = std::chrono::steady_clock::now();
    while (epsilon_of(states_) < options_.schedule.epsilon(phase_)) begin_phase();

    const std::size_t i = select_max_ucb(states_);
    ConfigState& s = states_[i];
    const long m = s.m + 1;
    const double alpha = hoeffding_radius(radius(static_cast<long>(states_.size()), m, s.kappa, options_.delta));

    std::vector<PlannedRun> plan;
    if (2.0 * alpha <= evaluate(u_, s.kappa) * (1.0 - s.f_hat)) {
        s.kappa *= 2.0;
        for (std::size_t j = 0; j < s.runs.size(); ++j) {
            if (s.runs[j].censored) plan.push_back({i, j + 1, s.kappa});
        }
    }
    plan.push_back({i, s.runs.size() + 1, s.kappa});

    const auto results = execute_runs(*runner_, states_, plan, options_.threads);
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const RunRecord rec{std::min(results[k].runtime, plan[k].captime), results[k].censored};
        target_time_ += rec.runtime;
        const std::size_t j = plan[k].instance - 1;
        if (j < s.runs.size()) {
            s.runs[j] = rec;
        } else {
            s.runs.push_back(rec);
        }
    }
    recompute_statistics(s, u_);
    update_bounds(s, u_, states_.size(), options_.delta);

    ++steps_;
    if (runner_->simulated_clock()) {
        wall_time_ = target_time_;
    } else {
        wall_time_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    const GuaranteeReport g = guarantee();
    StepRecord rec;
    rec.step = steps_;
    rec.wall_time = wall_time_;
    rec.target_time = target_time_;
    rec.epsilon = g.epsilon;
    rec.gamma = g.gamma;
    rec.incumbent_id = g.incumbent_id;
    rec.n = g.n;
    rec.arm_ids = {s.config.id};
    rec.captimes = {s.kappa};
    return rec;
}

GuaranteeReport CoupV1::guarantee() const {
    GuaranteeReport g;
    g.epsilon = epsilon_of(states_);
    g.n = states_.size();
    g.n_prime = g.n;
    const double p = static_cast<double>(phase_);
    g.gamma = std::log(std::numbers::pi * std::numbers::pi * p * p / (3.0 * options_.delta)) / static_cast<double>(g.n);
    g.delta = options_.delta;
    g.incumbent_id = states_[select_incumbent(states_)].config.id;
    g.wall_time_spent = wall_time_;
    g.total_target_time = target_time_;
    return g;
}

const Configuration& CoupV1::recommend() const { return states_[select_incumbent(states_)].config; }

nlohmann::json CoupV1::checkpoint() const {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : states_) states.push_back(state_to_json(space_, s));
    return {{"kind", "coup-v1"},
            {"phase", phase_},
            {"steps", steps_},
            {"target_time", target_time_},
            {"wall_time", wall_time_},
            {"rng", rng_to_string(rng_)},
            {"states", std::move(states)}};
}

void CoupV1::restore(const nlohmann::json& j) {
    if (j.value("kind", std::string()) != "coup-v1") throw std::invalid_argument("checkpoint is not a coup-v1 state");
    std::vector<ConfigState> states;
    for (const auto& s : j.at("states")) states.push_back(state_from_json(space_, s));
    if (states.empty()) throw std::invalid_argument("checkpoint has no configurations");
    states_ = std::move(states);
    phase_ = j.at("phase").get<long>();
    steps_ = j.at("steps").get<long>();
    target_time_ = j.at("target_time").get<double>();
    wall_time_ = j.at("wall_time").get<double>();
    rng_ = rng_from_string(j.at("rng").get<std::string>());
}

bool is_procedure_name(std::string_view name) {
    return std::find(std::begin(kProcedureNames), std::end(kProcedureNames), name) != std::end(kProcedureNames);
}

std::unique_ptr<Procedure> make_procedure(std::string_view name, const ConfigurationSpace& space,
                                          const UtilityFunction& u, const Runner& runner,
                                          const EngineOptions& options) {
    if (name == "coup-v1") {
        CoupV1Options v1;
        v1.delta = options.delta;
        v1.initial_captime = options.initial_captime;
        v1.max_configs = options.max_configs;
        v1.seed = options.seed;
        v1.threads = options.threads;
        return std::make_unique<CoupV1>(space, u, runner, v1);
    }
    EngineOptions o = options;
    if (name == "coup-plus-no-lucb") {
        o.selection = Selection::max_ucb;
    } else if (name == "coup-plus-hoeffding") {
        o.bounds = BoundKind::hoeffding;
    } else if (name != "coup-plus") {
        throw std::invalid_argument(fmt::format("unknown procedure '{}'", name));
    }
    return std::make_unique<Engine>(space, u, runner, o);
}

} // namespace coup
