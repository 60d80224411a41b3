#include "coup/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "coup/bounds.hpp"
#include "coup/parallel.hpp"

namespace coup {
namespace {

// Strict "a is preferred over b" for argmax selection with the tie rule
// (fewer samples, then lower id).
bool prefer(double va, const ConfigState& a, double vb, const ConfigState& b) {
    if (va != vb) return va > vb;
    if (a.m != b.m) return a.m < b.m;
    return a.config.id < b.config.id;
}

template <class Key>
std::size_t argmax_by(std::span<const ConfigState> states, Key key, std::size_t skip) {
    std::size_t best = states.size();
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (i == skip) continue;
        if (best == states.size() || prefer(key(states[i]), states[i], key(states[best]), states[best])) best = i;
    }
    return best;
}

std::vector<HistoryEntry> history_of(std::span<const ConfigState> states) {
    std::vector<HistoryEntry> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back({s.config, s.u_hat, s.m});
    return out;
}

} // namespace

nlohmann::json to_json(const StepRecord& r) {
    return {{"step", r.step},       {"wall_time", r.wall_time},       {"target_time", r.target_time},
            {"epsilon", r.epsilon}, {"gamma", r.gamma},               {"incumbent_id", r.incumbent_id},
            {"n", r.n},             {"arm_ids", r.arm_ids},           {"captimes", r.captimes}};
}

nlohmann::json to_json(const GuaranteeReport& r) {
    return {{"epsilon", r.epsilon},
            {"gamma", r.gamma},
            {"delta", r.delta},
            {"incumbent_id", r.incumbent_id},
            {"n", r.n},
            {"n_prime", r.n_prime},
            {"wall_time_spent", r.wall_time_spent},
            {"total_target_time", r.total_target_time}};
}

std::pair<std::size_t, std::size_t> select_arms(std::span<const ConfigState> states) {
    if (states.empty()) throw std::invalid_argument("select_arms needs at least one configuration");
    const std::size_t leader = argmax_by(states, [](const ConfigState& s) { return s.u_hat; }, states.size());
    if (states.size() == 1) return {leader, leader};
    const std::size_t challenger = argmax_by(states, [](const ConfigState& s) { return s.ucb; }, leader);
    return {leader, challenger};
}

std::size_t select_max_ucb(std::span<const ConfigState> states) {
    if (states.empty()) throw std::invalid_argument("select_max_ucb needs at least one configuration");
    return argmax_by(states, [](const ConfigState& s) { return s.ucb; }, states.size());
}

std::size_t select_incumbent(std::span<const ConfigState> states) {
    if (states.empty()) throw std::invalid_argument("no configurations to recommend from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < states.size(); ++i) {
        const auto& a = states[i];
        const auto& b = states[best];
        if (a.lcb > b.lcb || (a.lcb == b.lcb && a.config.id < b.config.id)) best = i;
    }
    return best;
}

bool should_double_captime(const ConfigState& state, const UtilityFunction& u) {
    return state.u_ucb - state.u_lcb <= evaluate(u, state.kappa) * (1.0 - state.f_lcb);
}

bool should_add_config(double epsilon, double gamma, double max_ucb) {
    return epsilon * epsilon < gamma * (1.0 - max_ucb);
}

std::size_t n_prime(std::size_t n, std::size_t n0) {
    if (n < n0) throw std::invalid_argument("n must be at least n0");
    return n0 + (n - n0) / 2;
}

double gamma_for(std::size_t n_prime, double delta) {
    if (n_prime == 0) throw std::invalid_argument("gamma needs n' >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("gamma needs delta > 0");
    const double np = static_cast<double>(n_prime);
    return std::log(std::numbers::pi * std::numbers::pi * np * np / (3.0 * delta)) / np;
}

double epsilon_of(std::span<const ConfigState> states) {
    if (states.empty()) return 1.0;
    double max_ucb = 0.0;
    double max_lcb = 0.0;
    for (const auto& s : states) {
        max_ucb = std::max(max_ucb, s.ucb);
        max_lcb = std::max(max_lcb, s.lcb);
    }
    return std::max(0.0, max_ucb - max_lcb);
}

void recompute_statistics(ConfigState& state, const UtilityFunction& u) {
    state.m = static_cast<long>(state.runs.size());
    if (state.m == 0) {
        state.u_hat = 0.0;
        state.f_hat = 0.0;
        return;
    }
    double su = 0.0;
    long done = 0;
    for (const auto& r : state.runs) {
        su += evaluate(u, std::min(r.runtime, state.kappa));
        if (!r.censored && r.runtime < state.kappa) ++done;
    }
    const double m = static_cast<double>(state.m);
    state.u_hat = std::clamp(su / m, 0.0, 1.0);
    state.f_hat = static_cast<double>(done) / m;
}

void update_bounds(ConfigState& state, const UtilityFunction& u, std::size_t n, double delta, BoundKind kind) {
    if (state.m < 1) throw std::invalid_argument("bounds need at least one run");
    const double a = radius(static_cast<long>(n), state.m, state.kappa, delta);
    if (kind == BoundKind::kl) {
        state.u_ucb = kl_ucb(state.u_hat, a);
        state.u_lcb = kl_lcb(state.u_hat, a);
        state.f_lcb = kl_lcb(state.f_hat, a);
    } else {
        const double alpha = hoeffding_radius(a);
        state.u_ucb = std::min(1.0, state.u_hat + alpha);
        state.u_lcb = std::max(0.0, state.u_hat - alpha);
        state.f_lcb = std::max(0.0, state.f_hat - alpha);
    }
    state.ucb = state.u_ucb;
    state.lcb = composite_lcb(state.u_lcb, state.f_lcb, evaluate(u, state.kappa));
}

std::vector<RunResult> execute_runs(const Runner& runner, std::span<const ConfigState> states,
                                    std::span<const PlannedRun> plan, int threads) {
    std::vector<RunResult> out(plan.size());
    parallel_for(plan.size(), threads, [&](std::size_t k) {
        const PlannedRun& p = plan[k];
        out[k] = runner.run(states[p.state_index].config, p.instance, p.captime);
    });
    return out;
}

// ---------------------------------------------------------------------------

Engine::Engine(ConfigurationSpace space, UtilityFunction u, const Runner& runner, EngineOptions options)
    : space_(std::move(space)), u_(std::move(u)), runner_(&runner), options_(std::move(options)), rng_(options_.seed) {
    if (options_.n0 < 1) throw std::invalid_argument("n0 must be at least 1");
    if (!(options_.delta > 0.0 && options_.delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (!(options_.initial_captime > 0.0)) throw std::invalid_argument("initial captime must be positive");
    if (options_.max_configs != 0 && options_.max_configs < options_.n0)
        throw std::invalid_argument("max_configs must be at least n0");
    states_.reserve(options_.n0);
    for (std::size_t i = 0; i < options_.n0; ++i) {
        ConfigState s;
        s.config = sample_random(space_, rng_);
        s.config.id = i;
        s.config.provenance = Provenance::random;
        s.kappa = options_.initial_captime;
        states_.push_back(std::move(s));
    }
}

void Engine::pull(std::span<const std::size_t> arms) {
    std::vector<PlannedRun> plan;
    for (std::size_t i : arms) {
        ConfigState& s = states_[i];
        if (s.m >= 1 && should_double_captime(s, u_)) {
            s.kappa *= 2.0;
            for (std::size_t j = 0; j < s.runs.size(); ++j) {
                if (s.runs[j].censored) plan.push_back({i, j + 1, s.kappa});
            }
        }
        plan.push_back({i, s.runs.size() + 1, s.kappa});
    }

    const auto results = execute_runs(*runner_, states_, plan, options_.threads);
    for (std::size_t k = 0; k < plan.size(); ++k) {
        ConfigState& s = states_[plan[k].state_index];
        const RunResult& r = results[k];
        const RunRecord rec{std::min(r.runtime, plan[k].captime), r.censored};
        target_time_ += rec.runtime;
        const std::size_t j = plan[k].instance - 1;
        if (j < s.runs.size()) {
            s.runs[j] = rec;
        } else {
            s.runs.push_back(rec);
        }
    }
    for (std::size_t i : arms) {
        recompute_statistics(states_[i], u_);
        update_bounds(states_[i], u_, states_.size(), options_.delta, options_.bounds);
    }
}

void Engine::add_config() {
    const std::size_t n = states_.size();
    Configuration c;
    if (n % 2 == 0) {
        try {
            const auto history = history_of(states_);
            c = propose_with_model(history, space_, rng_, options_.proposal, options_.threads);
        } catch (const std::exception& e) {
            spdlog::warn("model proposal failed ({}); sampling at random", e.what());
            c = sample_random(space_, rng_);
            c.provenance = Provenance::random;
        }
    } else {
        c = sample_random(space_, rng_);
        c.provenance = Provenance::random;
    }
    c.id = n;
    ConfigState s;
    s.config = std::move(c);
    s.kappa = options_.initial_captime;
    spdlog::debug("added configuration {} ({})", s.config.id, to_string(s.config.provenance));
    states_.push_back(std::move(s));
}

StepRecord Engine::step() {
    const auto start = std::chrono::steady_clock::now();
    StepRecord rec;

    std::vector<std::size_t> arms;
    if (options_.selection == Selection::lucb) {
        const auto [leader, challenger] = select_arms(states_);
        arms.push_back(leader);
        if (challenger != leader) arms.push_back(challenger);
    } else {
        arms.push_back(select_max_ucb(states_));
    }
    pull(arms);
    for (std::size_t i : arms) {
        rec.arm_ids.push_back(states_[i].config.id);
        rec.captimes.push_back(states_[i].kappa);
    }

    const bool room = options_.max_configs == 0 || states_.size() < options_.max_configs;
    if (room) {
        const double eps = epsilon_of(states_);
        const double gamma = gamma_for(n_prime(states_.size(), options_.n0), options_.delta);
        const double max_ucb = states_[select_max_ucb(states_)].ucb;
        if (should_add_config(eps, gamma, max_ucb)) add_config();
    }

    ++steps_;
    if (runner_->simulated_clock()) {
        wall_time_ = target_time_;
    } else {
        wall_time_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    const GuaranteeReport g = guarantee();
    rec.step = steps_;
    rec.wall_time = wall_time_;
    rec.target_time = target_time_;
    rec.epsilon = g.epsilon;
    rec.gamma = g.gamma;
    rec.incumbent_id = g.incumbent_id;
    rec.n = g.n;
    return rec;
}

GuaranteeReport Engine::guarantee() const {
    GuaranteeReport g;
    g.epsilon = epsilon_of(states_);
    g.n = states_.size();
    g.n_prime = n_prime(g.n, options_.n0);
    g.gamma = gamma_for(g.n_prime, options_.delta);
    g.delta = options_.delta;
    g.incumbent_id = states_[select_incumbent(states_)].config.id;
    g.wall_time_spent = wall_time_;
    g.total_target_time = target_time_;
    return g;
}

const Configuration& Engine::recommend() const { return states_[select_incumbent(states_)].config; }

nlohmann::json Engine::checkpoint() const {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : states_) states.push_back(state_to_json(space_, s));
    return {{"kind", "engine"},
            {"steps", steps_},
            {"target_time", target_time_},
            {"wall_time", wall_time_},
            {"rng", rng_to_string(rng_)},
            {"states", std::move(states)}};
}

void Engine::restore(const nlohmann::json& j) {
    if (j.value("kind", std::string()) != "engine") throw std::invalid_argument("checkpoint is not an engine state");
    std::vector<ConfigState> states;
    for (const auto& s : j.at("states")) states.push_back(state_from_json(space_, s));
    if (states.size() < options_.n0) throw std::invalid_argument("checkpoint has fewer than n0 configurations");
    states_ = std::move(states);
    steps_ = j.at("steps").get<long>();
    target_time_ = j.at("target_time").get<double>();
    wall_time_ = j.at("wall_time").get<double>();
    rng_ = rng_from_string(j.at("rng").get<std::string>());
}

// ---------------------------------------------------------------------------

nlohmann::json state_to_json(const ConfigurationSpace& space, const ConfigState& s) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : s.runs) runs.push_back({r.runtime, r.censored});
    return {{"config", config_to_json(space, s.config)},
            {"kappa", s.kappa},
            {"u_hat", s.u_hat},
            {"f_hat", s.f_hat},
            {"u_ucb", s.u_ucb},
            {"u_lcb", s.u_lcb},
            {"f_lcb", s.f_lcb},
            {"ucb", s.ucb},
            {"lcb", s.lcb},
            {"runs", std::move(runs)}};
}

ConfigState state_from_json(const ConfigurationSpace& space, const nlohmann::json& j) {
    ConfigState s;
    s.config = config_from_json(space, j.at("config"));
    s.kappa = j.at("kappa").get<double>();
    s.u_hat = j.at("u_hat").get<double>();
    s.f_hat = j.at("f_hat").get<double>();
    s.u_ucb = j.at("u_ucb").get<double>();
    s.u_lcb = j.at("u_lcb").get<double>();
    s.f_lcb = j.at("f_lcb").get<double>();
    s.ucb = j.at("ucb").get<double>();
    s.lcb = j.at("lcb").get<double>();
    for (const auto& r : j.at("runs")) s.runs.push_back({r.at(0).get<double>(), r.at(1).get<bool>()});
    s.m = static_cast<long>(s.runs.size());
    return s;
}

std::string rng_to_string(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from_string(const std::string& s) {
    std::istringstream is(s);
    Rng rng;
    is >> rng;
    if (!is) throw std::invalid_argument("malformed rng state in checkpoint");
    return rng;
}

} // namespace coup
