#include "coup/utility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace coup {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double parse_number(std::string_view text, std::string_view context) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty()) {
        throw std::invalid_argument(fmt::format("bad number '{}' in utility spec '{}'", text, context));
    }
    return value;
}

struct ParsedSpec {
    std::string family;
    std::map<std::string, std::string, std::less<>> params;
};

ParsedSpec split_spec(std::string_view spec) {
    ParsedSpec out;
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) {
        throw std::invalid_argument(fmt::format("utility spec '{}' is missing 'family:'", spec));
    }
    out.family = std::string(spec.substr(0, colon));
    std::string_view rest = spec.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw std::invalid_argument(fmt::format("utility spec '{}': expected key=value, got '{}'", spec, item));
        }
        auto [it, inserted] = out.params.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
        if (!inserted) {
            throw std::invalid_argument(fmt::format("utility spec '{}': duplicate key '{}'", spec, it->first));
        }
    }
    return out;
}

const std::vector<std::string>& keys_for(const std::string& family, std::string_view spec) {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"logcap", {"k0", "k1"}},
        {"par", {"c", "k"}},
        {"step", {"k"}},
        {"exp", {"lambda"}},
    };
    auto it = keys.find(family);
    if (it == keys.end()) {
        throw std::invalid_argument(fmt::format("utility spec '{}': unknown family '{}'", spec, family));
    }
    return it->second;
}

UtilityFunction build(const std::string& family, const std::map<std::string, double>& v) {
    if (family == "logcap") return UtilityFunction(LogCapped{v.at("k0"), v.at("k1")});
    if (family == "par") return UtilityFunction(Par{v.at("c"), v.at("k")});
    if (family == "step") return UtilityFunction(Step{v.at("k")});
    return UtilityFunction(Exponential{v.at("lambda")});
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace

UtilityFunction::UtilityFunction(Family family) : family_(family) {
    std::visit(Overloaded{
                   [](const LogCapped& f) {
                       if (!positive_finite(f.kappa0) || !std::isfinite(f.kappa1) || !(f.kappa1 > f.kappa0)) {
                           throw std::invalid_argument("logcap utility needs 0 < k0 < k1");
                       }
                   },
                   [](const Par& f) {
                       if (!std::isfinite(f.c) || !(f.c >= 1.0) || !positive_finite(f.kappa)) {
                           throw std::invalid_argument("par utility needs c >= 1 and k > 0");
                       }
                   },
                   [](const Step& f) {
                       if (!positive_finite(f.kappa)) throw std::invalid_argument("step utility needs k > 0");
                   },
                   [](const Exponential& f) {
                       if (!positive_finite(f.lambda)) throw std::invalid_argument("exp utility needs lambda > 0");
                   },
               },
               family_);
}

UtilityFunction UtilityFunction::parse(std::string_view spec) {
    const ParsedSpec parsed = split_spec(spec);
    const auto& keys = keys_for(parsed.family, spec);
    std::map<std::string, double> values;
    for (const auto& key : keys) {
        auto it = parsed.params.find(key);
        if (it == parsed.params.end()) {
            throw std::invalid_argument(fmt::format("utility spec '{}': missing '{}'", spec, key));
        }
        values[key] = parse_number(it->second, spec);
    }
    if (parsed.params.size() != keys.size()) {
        throw std::invalid_argument(fmt::format("utility spec '{}': unexpected parameters", spec));
    }
    return build(parsed.family, values);
}

double UtilityFunction::operator()(double t) const {
    return std::visit(Overloaded{
                          [t](const LogCapped& f) {
                              if (t <= f.kappa0) return 1.0;
                              if (t >= f.kappa1) return 0.0;
                              const double v = std::log(t / f.kappa1) / std::log(f.kappa0 / f.kappa1);
                              return std::clamp(v, 0.0, 1.0);
                          },
                          [t](const Par& f) { return t < f.kappa ? 1.0 - t / (f.c * f.kappa) : 0.0; },
                          [t](const Step& f) { return t < f.kappa ? 1.0 : 0.0; },
                          [t](const Exponential& f) { return std::exp(-f.lambda * t); },
                      },
                      family_);
}

std::string UtilityFunction::to_string() const {
    return std::visit(Overloaded{
                          [](const LogCapped& f) { return fmt::format("logcap:k0={},k1={}", f.kappa0, f.kappa1); },
                          [](const Par& f) { return fmt::format("par:c={},k={}", f.c, f.kappa); },
                          [](const Step& f) { return fmt::format("step:k={}", f.kappa); },
                          [](const Exponential& f) { return fmt::format("exp:lambda={}", f.lambda); },
                      },
                      family_);
}

std::optional<double> UtilityFunction::zero_point() const {
    return std::visit(Overloaded{
                          [](const LogCapped& f) -> std::optional<double> { return f.kappa1; },
                          [](const Par& f) -> std::optional<double> { return f.kappa; },
                          [](const Step& f) -> std::optional<double> { return f.kappa; },
                          [](const Exponential&) -> std::optional<double> { return std::nullopt; },
                      },
                      family_);
}

std::vector<double> UtilityFunction::breakpoints() const {
    return std::visit(Overloaded{
                          [](const LogCapped& f) { return std::vector<double>{f.kappa0, f.kappa1}; },
                          [](const Par& f) { return std::vector<double>{f.kappa}; },
                          [](const Step& f) { return std::vector<double>{f.kappa}; },
                          [](const Exponential&) { return std::vector<double>{}; },
                      },
                      family_);
}

double evaluate(const UtilityFunction& u, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument(fmt::format("runtime must be non-negative, got {}", t));
    if (t == 0.0) return 1.0;
    return u(t);
}

double par_score(double t, double c, double kappa) {
    if (!(t >= 0.0)) throw std::invalid_argument("runtime must be non-negative");
    if (!(c >= 1.0) || !(kappa > 0.0)) throw std::invalid_argument("par score needs c >= 1 and kappa > 0");
    return t < kappa ? t : c * kappa;
}

UtilitySweep UtilitySweep::parse(std::string_view spec) {
    const ParsedSpec parsed = split_spec(spec);
    const auto& keys = keys_for(parsed.family, spec);
    UtilitySweep sweep;
    sweep.spec_ = std::string(spec);
    for (const auto& [key, value] : parsed.params) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw std::invalid_argument(fmt::format("sweep spec '{}': unknown parameter '{}'", spec, key));
        }
        if (value == "*") {
            if (!sweep.swept_.empty()) {
                throw std::invalid_argument(fmt::format("sweep spec '{}': more than one '*'", spec));
            }
            sweep.swept_ = key;
        }
    }
    if (sweep.swept_.empty()) throw std::invalid_argument(fmt::format("sweep spec '{}' has no '*'", spec));
    for (const auto& key : keys) {
        if (!parsed.params.contains(key)) {
            throw std::invalid_argument(fmt::format("sweep spec '{}': missing '{}'", spec, key));
        }
    }
    return sweep;
}

UtilityFunction UtilitySweep::at(double value) const {
    const ParsedSpec parsed = split_spec(spec_);
    std::map<std::string, double> values;
    for (const auto& [key, text] : parsed.params) {
        values[key] = text == "*" ? value : parse_number(text, spec_);
    }
    return build(parsed.family, values);
}

} // namespace coup
