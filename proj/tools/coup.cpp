#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coup/commands.hpp"
#include "coup/log.hpp"

namespace {

template <class T>
void optional_option(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
    app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

} // namespace

int main(int argc, char** argv) {
    coup::init_logging();
    CLI::App app{"Utilitarian algorithm configuration with runtime capping"};
    app.require_subcommand(1);

    coup::ConfigureOptions configure;
    auto* c = app.add_subcommand("configure", "Run a configuration procedure on a scenario");
    c->add_option("--scenario", configure.scenario, "Scenario JSON file")->required();
    c->add_option("--out", configure.out_dir, "Output directory")->required();
    optional_option(c, "--seed", configure.seed, "Override the scenario seed");
    optional_option(c, "--procedure", configure.procedure, "coup-plus|coup-plus-no-lucb|coup-plus-hoeffding|coup-v1");
    optional_option(c, "--budget-wall", configure.budget_wall, "Wall-clock budget in seconds");
    optional_option(c, "--budget-steps", configure.budget_steps, "Maximum number of steps");
    optional_option(c, "--threads", configure.threads, "Worker threads for runs and model fitting");
    optional_option(c, "--resume", configure.resume, "Checkpoint file to continue from");
    c->add_option("--checkpoint-every", configure.checkpoint_every, "Steps between checkpoints")
        ->capture_default_str();

    coup::AnalyzeOptions analyze;
    auto* a = app.add_subcommand("analyze", "Compare solvers from a runtime table");
    a->add_option("--csv", analyze.csv, "CSV with solver,instance,runtime,status")->required();
    a->add_option("--out", analyze.out_dir, "Output directory")->required();
    a->add_option("--utility", analyze.utilities, "Utility spec, e.g. par:c=2,k=5000 (repeatable)");
    a->add_option("--sweep", analyze.sweeps, "Utility spec with one '*' parameter (repeatable)");
    a->add_option("--grid", analyze.grids, "lo:hi:steps[:log], one per --sweep");
    a->add_option("--cap", analyze.cap, "Runtime cap; defaults to the largest runtime in the table");

    coup::AblateOptions ablate;
    auto* b = app.add_subcommand("ablate", "Run several procedures over several seeds");
    b->add_option("--scenario", ablate.scenario, "Scenario JSON file")->required();
    b->add_option("--out", ablate.out_dir, "Output directory")->required();
    b->add_option("--procedure", ablate.procedures, "Procedure name (repeatable)");
    b->add_option("--seed", ablate.seeds, "Seed (repeatable)");
    b->add_option("--checkpoint-every", ablate.checkpoint_every, "Steps between CSV rows")->capture_default_str();
    optional_option(b, "--budget-wall", ablate.budget_wall, "Wall-clock budget in seconds");
    optional_option(b, "--budget-steps", ablate.budget_steps, "Maximum number of steps");
    optional_option(b, "--threads", ablate.threads, "Worker threads");

    coup::ValidateOptions validate;
    auto* v = app.add_subcommand("validate", "Evaluate saved configurations on fresh instances");
    v->add_option("--configs", validate.configs, "report.json, incumbents.json or a list of configurations")
        ->required();
    v->add_option("--scenario", validate.scenario, "Scenario JSON file")->required();
    v->add_option("--instances", validate.instances, "Number of validation instances")->required();
    optional_option(v, "--captime", validate.captime, "Captime for validation runs");
    optional_option(v, "--seed", validate.seed, "Override the scenario seed");
    v->add_option("--out", validate.out_dir, "Output directory (default: print to stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? coup::kExitOk : coup::kExitInput;
    }

    if (c->parsed()) return coup::cmd_configure(configure);
    if (a->parsed()) return coup::cmd_analyze(analyze);
    if (b->parsed()) return coup::cmd_ablate(ablate);
    return coup::cmd_validate(validate);
}
