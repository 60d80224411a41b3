#include "coup/runner.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <fmt/format.h>

namespace coup {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double exponential_mean_utility(double r, const UtilityFunction& u) {
    return std::visit(
        Overloaded{
            [r](const Step& f) { return -std::expm1(-r * f.kappa); },
            [r](const Exponential& f) { return r / (r + f.lambda); },
            [r](const Par& f) {
                const double k = f.kappa;
                const double solved = -std::expm1(-r * k);
                // int_0^k t r e^{-rt} dt
                const double partial_mean = (solved - r * k * std::exp(-r * k)) / r;
                return solved - partial_mean / (f.c * k);
            },
            [r](const LogCapped& f) {
                const double span = std::log(f.kappa1 / f.kappa0);
                const double e1_gap =
                    boost::math::expint(1, r * f.kappa0) - boost::math::expint(1, r * f.kappa1);
                const double below = -std::expm1(-r * f.kappa0);
                return below + (std::exp(-r * f.kappa0) * span - e1_gap) / span;
            },
        },
        u.family());
}

double lognormal_mean_utility(double mu, double sigma, const UtilityFunction& u) {
    return std::visit(
        Overloaded{
            [&](const Step& f) { return normal_cdf((std::log(f.kappa) - mu) / sigma); },
            [&](const Par& f) {
                const double z = (std::log(f.kappa) - mu) / sigma;
                const double partial_mean = std::exp(mu + 0.5 * sigma * sigma) * normal_cdf(z - sigma);
                return normal_cdf(z) - partial_mean / (f.c * f.kappa);
            },
            [&](const LogCapped& f) {
                const double l0 = std::log(f.kappa0);
                const double l1 = std::log(f.kappa1);
                const double a = (l0 - mu) / sigma;
                const double b = (l1 - mu) / sigma;
                const double inside =
                    (l1 - mu) * (normal_cdf(b) - normal_cdf(a)) - sigma * (normal_pdf(a) - normal_pdf(b));
                return normal_cdf(a) + inside / (l1 - l0);
            },
            [&](const Exponential& f) {
                // E[exp(-lambda e^Z)], Z ~ N(mu, sigma); integrate over the standard normal.
                auto integrand = [&](double z) { return std::exp(-f.lambda * std::exp(mu + sigma * z)) * normal_pdf(z); };
                return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 15, 1e-12);
            },
        },
        u.family());
}

ParamSurface parse_surface(const nlohmann::json& j) {
    ParamSurface out;
    if (j.is_number()) {
        out.base = j.get<double>();
        return out;
    }
    out.base = j.value("base", 0.0);
    out.linear = j.value("linear", std::vector<double>{});
    out.quadratic = j.value("quadratic", std::vector<double>{});
    out.center = j.value("center", std::vector<double>{});
    return out;
}

std::vector<std::string> read_instance_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(fmt::format("cannot open instance list '{}'", path));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    if (out.empty()) throw std::invalid_argument(fmt::format("instance list '{}' is empty", path));
    return out;
}

std::vector<std::string> tokenize(const std::string& command) {
    std::vector<std::string> words;
    std::string current;
    bool in_word = false;
    char quote = 0;
    for (char ch : command) {
        if (quote) {
            if (ch == quote) {
                quote = 0;
            } else {
                current.push_back(ch);
            }
        } else if (ch == '\'' || ch == '"') {
            quote = ch;
            in_word = true;
        } else if (std::isspace(static_cast<unsigned char>(ch))) {
            if (in_word) words.push_back(std::move(current));
            current.clear();
            in_word = false;
        } else {
            current.push_back(ch);
            in_word = true;
        }
    }
    if (quote) throw std::invalid_argument(fmt::format("unbalanced quote in command '{}'", command));
    if (in_word) words.push_back(std::move(current));
    if (words.empty()) throw std::invalid_argument("empty command template");
    return words;
}

std::string substitute(const std::string& word, const ConfigurationSpace& space, const Configuration& config,
                       const std::string& instance_path) {
    std::string out;
    std::size_t pos = 0;
    while (pos < word.size()) {
        const auto open = word.find('{', pos);
        if (open == std::string::npos) {
            out.append(word, pos);
            break;
        }
        const auto close = word.find('}', open);
        if (close == std::string::npos) throw std::invalid_argument(fmt::format("unclosed '{{' in '{}'", word));
        out.append(word, pos, open - pos);
        const std::string key = word.substr(open + 1, close - open - 1);
        if (key == "instance") {
            out += instance_path;
        } else {
            const auto params = space.params();
            const auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.name == key; });
            if (it == params.end()) throw std::invalid_argument(fmt::format("unknown placeholder '{{{}}}'", key));
            out += space.render_value(config, static_cast<std::size_t>(it - params.begin()));
        }
        pos = close + 1;
    }
    return out;
}

bool wait_until(pid_t pid, int& status, std::chrono::steady_clock::time_point deadline) {
    auto nap = std::chrono::microseconds(200);
    while (true) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) return true;
        if (r < 0 && errno != EINTR) return true;
        if (std::chrono::steady_clock::now() >= deadline) return false;
        std::this_thread::sleep_for(nap);
        nap = std::min(nap * 2, std::chrono::microseconds(5000));
    }
}

} // namespace

double ParamSurface::operator()(std::span<const double> x) const {
    double v = base;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (k < linear.size()) v += linear[k] * x[k];
        if (k < quadratic.size()) {
            const double c = k < center.size() ? center[k] : 0.0;
            v += quadratic[k] * (x[k] - c) * (x[k] - c);
        }
    }
    return v;
}

RuntimeDistribution SimScenario::distribution(std::span<const double> normalized) const {
    auto param = [&](const char* name) {
        const auto it = params.find(name);
        if (it == params.end()) throw std::invalid_argument(fmt::format("sim scenario is missing '{}'", name));
        const double v = it->second(normalized);
        if (!std::isfinite(v)) throw std::invalid_argument(fmt::format("sim parameter '{}' is not finite", name));
        return v;
    };
    switch (family) {
    case RuntimeFamily::exponential: {
        const double rate = param("rate");
        if (!(rate > 0.0)) throw std::invalid_argument(fmt::format("exponential rate must be > 0, got {}", rate));
        return ExponentialRuntime{rate};
    }
    case RuntimeFamily::lognormal: {
        const double sigma = param("sigma");
        if (!(sigma > 0.0)) throw std::invalid_argument(fmt::format("lognormal sigma must be > 0, got {}", sigma));
        return LognormalRuntime{param("mu"), sigma};
    }
    case RuntimeFamily::fixed: {
        const double t = param("t");
        if (!(t > 0.0)) throw std::invalid_argument(fmt::format("fixed runtime must be > 0, got {}", t));
        return FixedRuntime{t};
    }
    }
    throw std::logic_error("unreachable");
}

RunResult run_simulated(const SimScenario& scenario, const ConfigurationSpace& space, const Configuration& config,
                        std::uint64_t instance_index, double captime) {
    if (!(captime > 0.0)) throw std::invalid_argument("captime must be positive");
    const auto dist = scenario.distribution(normalize(space, config));
    Rng rng(derive_seed(scenario.seed, config.id, instance_index));
    double t = std::visit(Overloaded{
                              [&](const ExponentialRuntime& d) { return std::exponential_distribution<double>(d.rate)(rng); },
                              [&](const LognormalRuntime& d) {
                                  return std::lognormal_distribution<double>(d.mu, d.sigma)(rng);
                              },
                              [](const FixedRuntime& d) { return d.t; },
                          },
                          dist);
    t = std::max(t, std::numeric_limits<double>::min());
    RunResult result;
    result.instance_index = instance_index;
    result.config_id = config.id;
    result.censored = t >= captime;
    result.runtime = result.censored ? captime : t;
    return result;
}

double expected_utility(const RuntimeDistribution& dist, const UtilityFunction& u) {
    const double v = std::visit(Overloaded{
                                    [&](const ExponentialRuntime& d) { return exponential_mean_utility(d.rate, u); },
                                    [&](const LognormalRuntime& d) { return lognormal_mean_utility(d.mu, d.sigma, u); },
                                    [&](const FixedRuntime& d) { return evaluate(u, d.t); },
                                },
                                dist);
    return std::clamp(v, 0.0, 1.0);
}

SimRunner::SimRunner(ConfigurationSpace space, SimScenario scenario)
    : space_(std::move(space)), scenario_(std::move(scenario)) {}

RunResult SimRunner::run(const Configuration& config, std::uint64_t instance_index, double captime) const {
    return run_simulated(scenario_, space_, config, instance_index, captime);
}

std::optional<double> SimRunner::true_utility(const Configuration& config, const UtilityFunction& u) const {
    return expected_utility(scenario_.distribution(normalize(space_, config)), u);
}

std::vector<std::string> render_command(const SubprocessSpec& spec, const ConfigurationSpace& space,
                                        const Configuration& config, const std::string& instance_path) {
    std::vector<std::string> argv;
    for (const auto& word : tokenize(spec.command)) argv.push_back(substitute(word, space, config, instance_path));
    return argv;
}

RunResult run_subprocess(const SubprocessSpec& spec, const ConfigurationSpace& space, const Configuration& config,
                         std::uint64_t instance_index, const std::string& instance_path, double captime) {
    if (!(captime >= kMinSubprocessCaptime)) {
        throw std::invalid_argument(fmt::format("subprocess captime must be >= {} s", kMinSubprocessCaptime));
    }
    const auto argv_strings = render_command(spec, space, config, instance_path);
    std::vector<char*> argv;
    for (const auto& s : argv_strings) argv.push_back(const_cast<char*>(s.c_str()));
    argv.push_back(nullptr);

    int report[2];
    if (pipe2(report, O_CLOEXEC) != 0) {
        throw RunError(fmt::format("pipe failed: {}", std::strerror(errno)), config.id, instance_index);
    }

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) {
        close(report[0]);
        close(report[1]);
        throw RunError(fmt::format("fork failed: {}", std::strerror(errno)), config.id, instance_index);
    }
    if (pid == 0) {
        setpgid(0, 0);
        const int devnull = open("/dev/null", O_RDWR);
        if (devnull >= 0) {
            dup2(devnull, STDIN_FILENO);
            dup2(devnull, STDOUT_FILENO);
            dup2(devnull, STDERR_FILENO);
        }
        execvp(argv[0], argv.data());
        const int err = errno;
        [[maybe_unused]] auto n = write(report[1], &err, sizeof(err));
        _exit(127);
    }
    setpgid(pid, pid);
    close(report[1]);
    int exec_errno = 0;
    ssize_t got;
    do {
        got = read(report[0], &exec_errno, sizeof(exec_errno));
    } while (got < 0 && errno == EINTR);
    close(report[0]);
    if (got == static_cast<ssize_t>(sizeof(exec_errno))) {
        int status = 0;
        waitpid(pid, &status, 0);
        throw RunError(fmt::format("cannot execute '{}' for configuration {} on instance {} ({}): {}", argv_strings[0],
                                   config.id, instance_index, instance_path, std::strerror(exec_errno)),
                       config.id, instance_index);
    }

    RunResult result;
    result.instance_index = instance_index;
    result.config_id = config.id;

    const auto cap = std::chrono::duration<double>(captime);
    int status = 0;
    const bool finished = wait_until(pid, status, start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(cap));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!finished) {
        kill(-pid, SIGTERM);
        const auto grace = std::chrono::duration<double>(spec.grace_seconds);
        if (!wait_until(pid, status,
                        std::chrono::steady_clock::now() +
                            std::chrono::duration_cast<std::chrono::steady_clock::duration>(grace))) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
        }
        result.censored = true;
        result.runtime = captime;
        return result;
    }

    const bool clean_exit = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    if (!clean_exit) {
        if (spec.crash_policy == CrashPolicy::error) {
            throw RunError(fmt::format("configuration {} crashed on instance {} ({})", config.id, instance_index,
                                       instance_path),
                           config.id, instance_index);
        }
        result.crashed = true;
        result.censored = true;
        result.runtime = captime;
        return result;
    }
    if (elapsed >= captime) {
        result.censored = true;
        result.runtime = captime;
    } else {
        result.runtime = elapsed;
    }
    return result;
}

SubprocessRunner::SubprocessRunner(ConfigurationSpace space, SubprocessSpec spec)
    : space_(std::move(space)), spec_(std::move(spec)) {
    if (spec_.instances.empty()) throw std::invalid_argument("subprocess runner needs at least one instance");
    // Fail early on template errors.
    Configuration probe;
    for (const auto& p : space_.params()) {
        probe.values.push_back(p.is_categorical() ? 0.0 : std::get<Continuous>(p.kind).lower);
    }
    render_command(spec_, space_, probe, spec_.instances.front());
}

RunResult SubprocessRunner::run(const Configuration& config, std::uint64_t instance_index, double captime) const {
    if (instance_index < 1) throw std::invalid_argument("instance indices start at 1");
    const auto& path = spec_.instances[(instance_index - 1) % spec_.instances.size()];
    return run_subprocess(spec_, space_, config, instance_index, path, captime);
}

std::unique_ptr<Runner> runner_from_json(const ConfigurationSpace& space, const nlohmann::json& j,
                                         const std::string& base_dir, std::uint64_t default_seed) {
    const auto type = j.at("type").get<std::string>();
    if (type == "sim") {
        SimScenario sim;
        const auto family = j.at("family").get<std::string>();
        std::vector<std::string> names;
        if (family == "exponential") {
            sim.family = RuntimeFamily::exponential;
            names = {"rate"};
        } else if (family == "lognormal") {
            sim.family = RuntimeFamily::lognormal;
            names = {"mu", "sigma"};
        } else if (family == "fixed") {
            sim.family = RuntimeFamily::fixed;
            names = {"t"};
        } else {
            throw std::invalid_argument(fmt::format("unknown sim runtime family '{}'", family));
        }
        const auto& params = j.at("params");
        for (const auto& name : names) {
            sim.params.emplace(name, parse_surface(params.at(name)));
        }
        sim.seed = j.value("seed", default_seed);
        return std::make_unique<SimRunner>(space, std::move(sim));
    }
    if (type == "subprocess") {
        SubprocessSpec spec;
        spec.command = j.at("command").get<std::string>();
        std::filesystem::path list = j.at("instances").get<std::string>();
        if (list.is_relative()) list = std::filesystem::path(base_dir) / list;
        spec.instances = read_instance_list(list.string());
        const auto policy = j.value("crash_policy", std::string("censor"));
        if (policy == "censor") {
            spec.crash_policy = CrashPolicy::censor;
        } else if (policy == "error") {
            spec.crash_policy = CrashPolicy::error;
        } else {
            throw std::invalid_argument(fmt::format("unknown crash_policy '{}'", policy));
        }
        return std::make_unique<SubprocessRunner>(space, std::move(spec));
    }
    throw std::invalid_argument(fmt::format("unknown runner type '{}'", type));
}

} // namespace coup
