#include "coup/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "coup/cdfrank.hpp"

namespace fs = std::filesystem;

namespace coup {
namespace {

// Input problems (bad files, bad values) map to exit 2; failures while
// running the target map to exit 3.
template <class F>
int guarded(const char* command, F&& body) {
    try {
        return body();
    } catch (const RunError& e) {
        spdlog::error("{}: run failed for configuration {} on instance {}: {}", command, e.config_id(),
                      e.instance_index(), e.what());
        return kExitExecution;
    } catch (const CsvError& e) {
        spdlog::error("{}: {}", command, e.what());
        for (const auto& p : e.problems()) spdlog::error("  {}", p);
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}: {}", command, e.what());
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("{}: {}", command, e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        spdlog::error("{}: {}", command, e.what());
        return kExitExecution;
    }
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(fmt::format("cannot open '{}'", path));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
    }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
        out << text;
    }
    fs::rename(tmp, path);
}

fs::path prepare_out_dir(const std::string& dir) {
    if (dir.empty()) throw std::invalid_argument("an output directory is required");
    fs::create_directories(dir);
    return fs::path(dir);
}

template <class T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

ProposalParams parse_proposal(const nlohmann::json& j) {
    ProposalParams p;
    p.starts = j.value("starts", p.starts);
    p.walk_budget = j.value("walk_budget", p.walk_budget);
    p.random_candidates = j.value("random_candidates", p.random_candidates);
    p.min_history = j.value("min_history", p.min_history);
    p.ensemble.models = j.value("models", p.ensemble.models);
    p.ensemble.bootstrap_factor = j.value("bootstrap_factor", p.ensemble.bootstrap_factor);
    p.ensemble.boosting.rounds = j.value("rounds", p.ensemble.boosting.rounds);
    p.ensemble.boosting.max_depth = j.value("max_depth", p.ensemble.boosting.max_depth);
    p.ensemble.boosting.learning_rate = j.value("learning_rate", p.ensemble.boosting.learning_rate);
    if (p.starts < 0 || p.walk_budget < 0 || p.random_candidates < 0 || p.ensemble.models < 1 ||
        p.ensemble.boosting.rounds < 0 || p.ensemble.boosting.max_depth < 0 || p.ensemble.boosting.max_depth > 3 ||
        !(p.ensemble.boosting.learning_rate > 0.0) || !(p.ensemble.bootstrap_factor > 0.0))
        throw std::invalid_argument("invalid surrogate settings");
    return p;
}

// Drives a procedure until a budget is hit; returns the reason.
std::string drive(Procedure& p, const Budgets& b, const std::function<void(const StepRecord&)>& on_step) {
    StepRecord now;
    {
        const GuaranteeReport g = p.guarantee();
        now.step = p.steps_taken();
        now.wall_time = g.wall_time_spent;
        now.target_time = g.total_target_time;
        now.epsilon = p.steps_taken() > 0 ? g.epsilon : 1.0;
        now.gamma = g.gamma;
    }
    std::string reason = p.steps_taken() > 0 ? stop_reason(b, now) : std::string();
    if (b.max_steps && *b.max_steps <= 0) reason = "max_steps";
    while (reason.empty()) {
        now = p.step();
        on_step(now);
        reason = stop_reason(b, now);
    }
    return reason;
}

std::string csv_number(double v) { return fmt::format("{}", v); }

} // namespace

Scenario parse_scenario(const nlohmann::json& j, const std::string& base_dir) {
    if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");
    ConfigurationSpace space = space_from_json(j.at("space"));
    UtilityFunction utility = UtilityFunction::parse(j.at("utility").get<std::string>());

    EngineOptions e;
    e.delta = j.value("delta", e.delta);
    e.n0 = j.value("n0", e.n0);
    e.initial_captime = j.value("initial_captime", e.initial_captime);
    e.seed = j.value("seed", e.seed);
    e.threads = j.value("threads", e.threads);
    if (j.contains("surrogate")) e.proposal = parse_proposal(j.at("surrogate"));
    if (!(e.delta > 0.0 && e.delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (e.n0 < 1) throw std::invalid_argument("n0 must be at least 1");
    if (!(e.initial_captime > 0.0)) throw std::invalid_argument("initial_captime must be positive");
    if (e.threads < 1) throw std::invalid_argument("threads must be at least 1");

    Budgets b;
    if (j.contains("budgets")) {
        const auto& bj = j.at("budgets");
        b.wall_seconds = optional_field<double>(bj, "wall_seconds");
        b.target_seconds = optional_field<double>(bj, "target_seconds");
        b.max_steps = optional_field<long>(bj, "max_steps");
        b.epsilon_target = optional_field<double>(bj, "epsilon_target");
        b.gamma_target = optional_field<double>(bj, "gamma_target");
        e.max_configs = bj.value("max_configs", std::size_t{0});
    }
    if (e.max_configs != 0 && e.max_configs < e.n0) throw std::invalid_argument("max_configs must be at least n0");

    std::string procedure = j.value("procedure", std::string("coup-plus"));
    if (!is_procedure_name(procedure)) throw std::invalid_argument(fmt::format("unknown procedure '{}'", procedure));
    if (!j.contains("runner")) throw std::invalid_argument("scenario needs a runner");

    return Scenario{std::move(space), std::move(utility), std::move(e), b, std::move(procedure), j.at("runner"),
                    base_dir};
}

Scenario load_scenario(const std::string& path) {
    const nlohmann::json j = read_json_file(path);
    fs::path dir = fs::path(path).parent_path();
    if (dir.empty()) dir = ".";
    return parse_scenario(j, dir.string());
}

std::unique_ptr<Runner> make_runner(const Scenario& s, std::uint64_t seed) {
    return runner_from_json(s.space, s.runner, s.base_dir, seed);
}

std::string stop_reason(const Budgets& b, const StepRecord& last) {
    if (b.max_steps && last.step >= *b.max_steps) return "max_steps";
    if (b.target_seconds && last.target_time >= *b.target_seconds) return "target_seconds";
    if (b.wall_seconds && last.wall_time >= *b.wall_seconds) return "wall_seconds";
    if ((b.epsilon_target || b.gamma_target) && (!b.epsilon_target || last.epsilon <= *b.epsilon_target) &&
        (!b.gamma_target || last.gamma <= *b.gamma_target))
        return "guarantee_reached";
    return {};
}

std::vector<Configuration> load_configurations(const ConfigurationSpace& space, const nlohmann::json& j) {
    std::vector<Configuration> out;
    if (j.is_array()) {
        for (const auto& c : j) out.push_back(config_from_json(space, c));
    } else if (j.is_object() && j.contains("configurations")) {
        for (const auto& c : j.at("configurations")) out.push_back(config_from_json(space, c));
    } else if (j.is_object() && j.contains("recommended")) {
        out.push_back(config_from_json(space, j.at("recommended")));
    } else if (j.is_object() && j.contains("values")) {
        out.push_back(config_from_json(space, j));
    } else {
        throw std::invalid_argument("no configurations found");
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_configure(const ConfigureOptions& o) {
    return guarded("configure", [&] {
        Scenario s = load_scenario(o.scenario);
        if (o.seed) s.engine.seed = *o.seed;
        if (o.procedure) {
            if (!is_procedure_name(*o.procedure))
                throw std::invalid_argument(fmt::format("unknown procedure '{}'", *o.procedure));
            s.procedure = *o.procedure;
        }
        if (o.budget_wall) s.budgets.wall_seconds = *o.budget_wall;
        if (o.budget_steps) s.budgets.max_steps = *o.budget_steps;
        if (o.threads) {
            if (*o.threads < 1) throw std::invalid_argument("threads must be at least 1");
            s.engine.threads = *o.threads;
        }
        if (o.checkpoint_every < 1) throw std::invalid_argument("checkpoint interval must be at least 1");
        if (!s.budgets.bounded())
            throw std::invalid_argument("set at least one of wall_seconds, target_seconds or max_steps");

        const fs::path out = prepare_out_dir(o.out_dir);
        const auto runner = make_runner(s, s.engine.seed);
        auto proc = make_procedure(s.procedure, s.space, s.utility, *runner, s.engine);

        std::vector<std::string> kept_lines;
        std::vector<ConfigId> incumbents;
        if (o.resume) {
            const nlohmann::json cp = read_json_file(*o.resume);
            if (cp.at("procedure").get<std::string>() != s.procedure)
                throw std::invalid_argument("checkpoint was written by a different procedure");
            if (cp.at("seed").get<std::uint64_t>() != s.engine.seed)
                throw std::invalid_argument("checkpoint was written with a different seed");
            proc->restore(cp.at("state"));
            std::ifstream old(out / "trajectory.jsonl");
            std::string line;
            while (static_cast<long>(kept_lines.size()) < proc->steps_taken() && std::getline(old, line)) {
                const auto rec = nlohmann::json::parse(line);
                const auto id = rec.at("incumbent_id").get<ConfigId>();
                if (std::find(incumbents.begin(), incumbents.end(), id) == incumbents.end()) incumbents.push_back(id);
                kept_lines.push_back(line);
            }
            spdlog::info("resumed at step {}", proc->steps_taken());
        }

        std::ofstream traj(out / "trajectory.jsonl", std::ios::binary | std::ios::trunc);
        if (!traj) throw std::runtime_error("cannot write trajectory.jsonl");
        for (const auto& l : kept_lines) traj << l << '\n';

        const auto write_checkpoint = [&] {
            const nlohmann::json cp = {
                {"procedure", s.procedure}, {"seed", s.engine.seed}, {"state", proc->checkpoint()}};
            write_file_atomic(out / "checkpoint.json", cp.dump() + "\n");
        };

        const std::string reason = drive(*proc, s.budgets, [&](const StepRecord& r) {
            traj << to_json(r).dump() << '\n';
            if (std::find(incumbents.begin(), incumbents.end(), r.incumbent_id) == incumbents.end())
                incumbents.push_back(r.incumbent_id);
            if (r.step % o.checkpoint_every == 0) {
                traj.flush();
                write_checkpoint();
            }
            spdlog::debug("step {}: epsilon {:.4f} gamma {:.4f} n {}", r.step, r.epsilon, r.gamma, r.n);
        });
        traj.flush();
        write_checkpoint();

        const GuaranteeReport g = proc->guarantee();
        const Configuration& best = proc->recommend();
        nlohmann::json report = {{"procedure", s.procedure},
                                 {"seed", s.engine.seed},
                                 {"steps", proc->steps_taken()},
                                 {"stop_reason", reason},
                                 {"guarantee", to_json(g)},
                                 {"recommended", config_to_json(s.space, best)}};
        if (const auto tu = runner->true_utility(best, s.utility)) report["recommended_true_utility"] = *tu;
        write_file_atomic(out / "report.json", report.dump(2) + "\n");

        nlohmann::json inc = nlohmann::json::array();
        const auto states = proc->states();
        for (ConfigId id : incumbents) {
            if (id < states.size()) inc.push_back(config_to_json(s.space, states[id].config));
        }
        write_file_atomic(out / "incumbents.json", nlohmann::json{{"configurations", inc}}.dump(2) + "\n");

        spdlog::info("stopped ({}) after {} steps: epsilon {:.4f}, gamma {:.4f}, incumbent {}", reason,
                     proc->steps_taken(), g.epsilon, g.gamma, g.incumbent_id);
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------

int cmd_analyze(const AnalyzeOptions& o) {
    return guarded("analyze", [&] {
        if (o.sweeps.size() != o.grids.size())
            throw std::invalid_argument(
                fmt::format("{} sweep(s) but {} grid(s); pass one --grid per --sweep", o.sweeps.size(), o.grids.size()));
        std::vector<UtilityFunction> utilities;
        for (const auto& spec : o.utilities) utilities.push_back(UtilityFunction::parse(spec));
        std::vector<UtilitySweep> sweeps;
        std::vector<std::vector<double>> grids;
        for (std::size_t k = 0; k < o.sweeps.size(); ++k) {
            sweeps.push_back(UtilitySweep::parse(o.sweeps[k]));
            grids.push_back(parse_grid(o.grids[k]));
        }

        std::ifstream in(o.csv);
        if (!in) throw std::invalid_argument(fmt::format("cannot open '{}'", o.csv));
        const RuntimeTable table = read_runtime_csv(in);
        const std::vector<EmpiricalCdf> cdfs = build_cdfs(table, o.cap);
        const fs::path out = prepare_out_dir(o.out_dir);

        {
            std::ostringstream csv;
            csv << "solver";
            for (const auto& c : cdfs) csv << ',' << c.solver();
            csv << '\n';
            for (const auto& a : cdfs) {
                csv << a.solver();
                for (const auto& b : cdfs) csv << ',' << to_string(fosd(a, b));
                csv << '\n';
            }
            write_file_atomic(out / "fosd_matrix.csv", csv.str());
        }

        const auto ranking_for = [&](const UtilityFunction& u) {
            std::vector<std::pair<std::string, double>> us;
            for (const auto& c : cdfs) us.emplace_back(c.solver(), expected_utility(c, u));
            return rank_by_utility(us);
        };
        const auto write_l1 = [&](const fs::path& path, const std::vector<std::string>& labels,
                                  const std::vector<Ranking>& rankings) {
            std::ostringstream csv;
            csv << "label";
            for (const auto& l : labels) csv << ',' << l;
            csv << '\n';
            for (std::size_t i = 0; i < rankings.size(); ++i) {
                csv << labels[i];
                for (std::size_t k = 0; k < rankings.size(); ++k) csv << ',' << l1_distance(rankings[i], rankings[k]);
                csv << '\n';
            }
            write_file_atomic(path, csv.str());
        };

        {
            std::ostringstream csv;
            csv << "solver";
            for (const auto& u : utilities) csv << ",\"" << u.to_string() << '"';
            csv << '\n';
            for (const auto& c : cdfs) {
                csv << c.solver();
                for (const auto& u : utilities) csv << ',' << csv_number(expected_utility(c, u));
                csv << '\n';
            }
            write_file_atomic(out / "expected_utility.csv", csv.str());

            std::vector<std::string> labels;
            std::vector<Ranking> rankings;
            for (const auto& u : utilities) {
                labels.push_back('"' + u.to_string() + '"');
                rankings.push_back(ranking_for(u));
            }
            write_l1(out / "l1_utilities.csv", labels, rankings);
        }

        nlohmann::json sweeps_meta = nlohmann::json::array();
        for (std::size_t k = 0; k < sweeps.size(); ++k) {
            const RegretTable t = regret_curve(cdfs, sweeps[k], grids[k]);
            std::ostringstream csv;
            csv << "theta,solver,utility,regret,best\n";
            for (std::size_t g = 0; g < t.grid.size(); ++g) {
                for (std::size_t s = 0; s < t.solvers.size(); ++s) {
                    csv << csv_number(t.grid[g]) << ',' << t.solvers[s] << ',' << csv_number(t.utility[s][g]) << ','
                        << csv_number(t.regret[s][g]) << ',' << t.best[g] << '\n';
                }
            }
            write_file_atomic(out / fmt::format("regret_{}.csv", k), csv.str());

            std::vector<std::string> labels;
            std::vector<Ranking> rankings;
            std::ostringstream rk;
            rk << "theta";
            for (const auto& c : cdfs) rk << ',' << c.solver();
            rk << '\n';
            for (double theta : t.grid) {
                labels.push_back(csv_number(theta));
                rankings.push_back(ranking_for(sweeps[k].at(theta)));
                rk << csv_number(theta);
                for (const auto& c : cdfs) rk << ',' << rankings.back().at(c.solver());
                rk << '\n';
            }
            write_file_atomic(out / fmt::format("rankings_{}.csv", k), rk.str());
            write_l1(out / fmt::format("l1_{}.csv", k), labels, rankings);
            sweeps_meta.push_back({{"index", k}, {"sweep", sweeps[k].spec()}, {"grid", o.grids[k]}});
        }

        const auto n = static_cast<long>(cdfs.size());
        nlohmann::json solvers = nlohmann::json::array();
        for (const auto& c : cdfs)
            solvers.push_back({{"solver", c.solver()}, {"samples", c.total()}, {"censored", c.censored_count()}});
        const nlohmann::json meta = {{"cap", cdfs.front().cap()},
                                     {"solvers", solvers},
                                     {"footrule_max", max_footrule(n)},
                                     {"footrule_pairwise_normalizer", n * (n - 1) / 2},
                                     {"sweeps", sweeps_meta}};
        write_file_atomic(out / "metadata.json", meta.dump(2) + "\n");
        spdlog::info("analyzed {} solvers", n);
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------

int cmd_ablate(const AblateOptions& o) {
    return guarded("ablate", [&] {
        Scenario s = load_scenario(o.scenario);
        if (o.budget_wall) s.budgets.wall_seconds = *o.budget_wall;
        if (o.budget_steps) s.budgets.max_steps = *o.budget_steps;
        if (o.threads) s.engine.threads = *o.threads;
        if (!s.budgets.bounded())
            throw std::invalid_argument("set at least one of wall_seconds, target_seconds or max_steps");
        if (o.checkpoint_every < 1) throw std::invalid_argument("checkpoint interval must be at least 1");
        const std::vector<std::string> procedures =
            o.procedures.empty() ? std::vector<std::string>{s.procedure} : o.procedures;
        for (const auto& p : procedures) {
            if (!is_procedure_name(p)) throw std::invalid_argument(fmt::format("unknown procedure '{}'", p));
        }
        const std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector<std::uint64_t>{s.engine.seed} : o.seeds;
        const fs::path out = prepare_out_dir(o.out_dir);

        std::ostringstream csv;
        csv << "procedure,seed,checkpoint,step,target_time,epsilon,gamma,incumbent_id,incumbent_true_utility\n";
        for (const auto& name : procedures) {
            for (std::uint64_t seed : seeds) {
                EngineOptions e = s.engine;
                e.seed = seed;
                const auto runner = make_runner(s, seed);
                auto proc = make_procedure(name, s.space, s.utility, *runner, e);
                long checkpoint = 0;
                long last_row = -1;
                StepRecord last;
                const auto row = [&](const StepRecord& r) {
                    const auto tu = runner->true_utility(proc->states()[r.incumbent_id].config, s.utility);
                    csv << name << ',' << seed << ',' << ++checkpoint << ',' << r.step << ','
                        << csv_number(r.target_time) << ',' << csv_number(r.epsilon) << ',' << csv_number(r.gamma)
                        << ',' << r.incumbent_id << ',' << (tu ? csv_number(*tu) : std::string()) << '\n';
                    last_row = r.step;
                };
                drive(*proc, s.budgets, [&](const StepRecord& r) {
                    last = r;
                    if (r.step % o.checkpoint_every == 0) row(r);
                });
                if (last.step > 0 && last_row != last.step) row(last);
                spdlog::info("{} seed {}: {} steps, epsilon {:.4f}", name, seed, proc->steps_taken(),
                             proc->guarantee().epsilon);
            }
        }
        write_file_atomic(out / "ablation.csv", csv.str());
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------

int cmd_validate(const ValidateOptions& o) {
    return guarded("validate", [&] {
        if (o.instances < 1) throw std::invalid_argument("at least one validation instance is required");
        const Scenario s = load_scenario(o.scenario);
        std::vector<Configuration> configs = load_configurations(s.space, read_json_file(o.configs));
        if (configs.empty()) throw std::invalid_argument("no configurations to validate");
        // Repeated parameter settings share the id of their first occurrence so
        // they see the same runtimes.
        for (std::size_t i = 1; i < configs.size(); ++i) {
            for (std::size_t k = 0; k < i; ++k) {
                if (same_values(configs[i], configs[k])) {
                    configs[i].id = configs[k].id;
                    break;
                }
            }
        }

        const double captime = o.captime ? *o.captime : s.utility.zero_point().value_or(60.0);
        if (!(captime > 0.0)) throw std::invalid_argument("validation captime must be positive");
        const auto runner = make_runner(s, o.seed ? *o.seed : s.engine.seed);

        std::ostringstream csv;
        csv << "config_id,instances,captime,mean_utility,solved_fraction\n";
        for (const auto& c : configs) {
            double su = 0.0;
            long solved = 0;
            for (long j = 1; j <= o.instances; ++j) {
                const RunResult r = runner->run(c, kValidationOffset + static_cast<std::uint64_t>(j), captime);
                su += evaluate(s.utility, std::min(r.runtime, captime));
                if (!r.censored) ++solved;
            }
            const double n = static_cast<double>(o.instances);
            csv << c.id << ',' << o.instances << ',' << csv_number(captime) << ',' << csv_number(su / n) << ','
                << csv_number(static_cast<double>(solved) / n) << '\n';
        }
        if (o.out_dir.empty()) {
            std::cout << csv.str();
        } else {
            write_file_atomic(prepare_out_dir(o.out_dir) / "validation.csv", csv.str());
        }
        return kExitOk;
    });
}

} // namespace coup
