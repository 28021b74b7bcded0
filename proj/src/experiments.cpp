#include "eqf/experiments.hpp"

#include "eqf/analysis.hpp"
#include "eqf/core.hpp"
#include "eqf/kp_experiment.hpp"
#include "eqf/order_detect.hpp"
#include "eqf/parallel.hpp"
#include "eqf/patch.hpp"
#include "eqf/projective.hpp"
#include "eqf/rng.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace eqf::cli {

// ---------------------------------------------------------------------------
// schema

namespace {

enum class Kind { integer, real, boolean, choice, real_list };

struct ParamSpec {
    std::string key;
    Kind kind;
    std::optional<ParamValue> fallback; // nullopt: required
    std::vector<std::string> choices = {};
};

const std::vector<ParamSpec>& schema(Experiment e) {
    static const std::vector<ParamSpec> projective = {
        {"N", Kind::integer, std::nullopt},
        {"k", Kind::integer, std::nullopt},
        {"dt_micro", Kind::real, std::nullopt},
        {"dt_macro", Kind::real, std::nullopt},
        {"alpha", Kind::real, 0.0},
        {"n_steps", Kind::integer, 10000LL},
        {"drift", Kind::choice, std::string("zero"), {"zero", "ou"}},
        {"theta", Kind::real, 1.0},
        {"noise_amplitude", Kind::real, 1.0},
        {"x0", Kind::real, 0.0},
        {"moment_tolerance_se", Kind::real, 3.0},
        {"variance_tolerance", Kind::real, 0.15},
    };
    static const std::vector<ParamSpec> patch = {
        {"pde", Kind::choice, std::nullopt, {"heat", "advection", "biharmonic"}},
        {"coefficient", Kind::real, 1.0},
        {"lifting", Kind::choice, std::string("central_d2"), {"central_d2", "upwind_d2", "central_d4"}},
        {"wind_sign", Kind::integer, 1LL},
        {"evolution", Kind::choice, std::string("exact"), {"exact", "fd_buffered"}},
        {"n_points", Kind::integer, 64LL},
        {"h_ratio", Kind::real, 0.5},
        {"cfl", Kind::real, 0.0},
        {"dt_micro_ratio", Kind::real, 1e-3},
        {"alpha", Kind::real, 0.0},
        {"probe_steps", Kind::integer, 400LL},
        {"buffer_ratio", Kind::real, 0.0},
        {"dx_micro_ratio", Kind::real, 0.05},
        {"convergence_grids", Kind::real_list, std::vector<double>{32, 64, 128}},
        {"T", Kind::real, 0.5},
        {"expect_stability", Kind::choice, std::string("any"), {"any", "stable", "unstable", "marginal"}},
        {"expect_order", Kind::real, -1.0},
        {"order_tolerance", Kind::real, 0.3},
        {"growth_tolerance", Kind::real, 0.02},
    };
    static const std::vector<ParamSpec> order_detect = {
        {"target", Kind::choice, std::nullopt, {"heat", "advection", "biharmonic", "adversarial"}},
        {"d_max", Kind::integer, 2LL},
        {"dt_micro", Kind::real, 1e-3},
        {"h", Kind::real, 0.1},
        {"arity", Kind::integer, 100LL},
        {"threshold", Kind::real, 0.0},
        {"stop_after", Kind::integer, 5LL},
        {"n_base", Kind::integer, 16LL},
        {"n_perturb", Kind::integer, 256LL},
        {"budget", Kind::integer, 100000000LL},
        {"expect_order", Kind::integer, -1LL},
        {"expect_stopped_early", Kind::choice, std::string("any"), {"any", "true", "false"}},
    };
    static const std::vector<ParamSpec> kp = {
        {"deltas", Kind::real_list, std::vector<double>{1.0, 0.3, 0.1, 0.05}},
        {"n_trajectories", Kind::integer, 24LL},
        {"n_modes", Kind::integer, 512LL},
        {"spectrum", Kind::real, 0.0},
        {"T", Kind::real, 0.003},
        {"dt", Kind::real, 1e-6},
        {"output_every", Kind::integer, 10LL},
        {"lag_min_fraction", Kind::real, 0.01},
        {"lag_max_fraction", Kind::real, 0.25},
        {"n_lags", Kind::integer, 12LL},
        {"v0", Kind::real, 1.0},
        {"diffusive_delta", Kind::real, 0.05},
        {"diffusive_range", Kind::real_list, std::vector<double>{0.8, 1.2}},
        {"ballistic_delta", Kind::real, 1.0},
        {"ballistic_range", Kind::real_list, std::vector<double>{1.7, 2.1}},
    };
    switch (e) {
    case Experiment::projective: return projective;
    case Experiment::patch: return patch;
    case Experiment::order_detect: return order_detect;
    case Experiment::kp: return kp;
    }
    return projective;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<long long> parse_int(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data() + (!s.empty() && s[0] == '+' ? 1 : 0), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<ParamValue> parse_value(const ParamSpec& spec, const std::string& raw) {
    switch (spec.kind) {
    case Kind::integer:
        if (auto v = parse_int(raw)) return ParamValue{*v};
        return std::nullopt;
    case Kind::real:
        if (auto v = parse_real(raw)) return ParamValue{*v};
        return std::nullopt;
    case Kind::boolean:
        if (raw == "true") return ParamValue{true};
        if (raw == "false") return ParamValue{false};
        return std::nullopt;
    case Kind::choice:
        if (std::find(spec.choices.begin(), spec.choices.end(), raw) != spec.choices.end()) return ParamValue{raw};
        return std::nullopt;
    case Kind::real_list: {
        std::vector<double> out;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto v = parse_real(trim(item));
            if (!v) return std::nullopt;
            out.push_back(*v);
        }
        if (out.empty()) return std::nullopt;
        return ParamValue{std::move(out)};
    }
    }
    return std::nullopt;
}

std::string kind_name(const ParamSpec& spec) {
    switch (spec.kind) {
    case Kind::integer: return "an integer";
    case Kind::real: return "a finite real";
    case Kind::boolean: return "true or false";
    case Kind::real_list: return "a comma-separated list of reals";
    case Kind::choice: {
        std::string s = "one of {";
        for (std::size_t i = 0; i < spec.choices.size(); ++i) s += (i ? ", " : "") + spec.choices[i];
        return s + "}";
    }
    }
    return "?";
}

std::string value_text(const ParamValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, long long>) return std::to_string(x);
            else if constexpr (std::is_same_v<T, double>) return format_number(x);
            else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
            else if constexpr (std::is_same_v<T, std::string>) return x;
            else {
                std::string s;
                for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + format_number(x[i]);
                return s;
            }
        },
        v);
}

std::string line_prefix(int line) { return "line " + std::to_string(line) + ": "; }

} // namespace

const char* to_string(Experiment e) noexcept {
    switch (e) {
    case Experiment::projective: return "projective";
    case Experiment::patch: return "patch";
    case Experiment::order_detect: return "order-detect";
    case Experiment::kp: return "kp";
    }
    return "unknown";
}

std::optional<Experiment> experiment_from_string(const std::string& name) {
    for (auto e : {Experiment::projective, Experiment::patch, Experiment::order_detect, Experiment::kp})
        if (name == to_string(e)) return e;
    return std::nullopt;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

ConfigError::ConfigError(std::vector<std::string> messages)
    : std::runtime_error([&] {
          std::string s;
          for (const auto& m : messages) s += m + "\n";
          return s;
      }()),
      messages_(std::move(messages)) {}

template <class T>
static const T& get_as(const ExperimentConfig& cfg, const std::string& key) {
    auto it = cfg.parameters.find(key);
    if (it == cfg.parameters.end()) throw Error(ErrorCode::config_error, "missing parameter " + key);
    const T* v = std::get_if<T>(&it->second);
    if (!v) throw Error(ErrorCode::config_error, "parameter " + key + " has unexpected type");
    return *v;
}

long long ExperimentConfig::get_int(const std::string& key) const { return get_as<long long>(*this, key); }
double ExperimentConfig::get_real(const std::string& key) const { return get_as<double>(*this, key); }
bool ExperimentConfig::get_bool(const std::string& key) const { return get_as<bool>(*this, key); }
const std::string& ExperimentConfig::get_string(const std::string& key) const {
    return get_as<std::string>(*this, key);
}
const std::vector<double>& ExperimentConfig::get_list(const std::string& key) const {
    return get_as<std::vector<double>>(*this, key);
}

std::string ExperimentConfig::echo() const {
    std::ostringstream os;
    os << "experiment = " << to_string(experiment) << "\n\n[run]\nseed = " << seed
       << "\noutput_dir = " << output_dir.string() << "\n\n[" << to_string(experiment) << "]\n";
    for (const auto& spec : schema(experiment)) {
        auto it = parameters.find(spec.key);
        if (it != parameters.end()) os << spec.key << " = " << value_text(it->second) << "\n";
    }
    return os.str();
}

namespace {

struct RawLine {
    int line;
    std::string section;
    std::string key;
    std::string value;
};

void check_cross_fields(const ExperimentConfig& cfg, const std::map<std::string, int>& key_lines,
                        std::vector<std::string>& errors) {
    const auto where = [&](const std::string& key) {
        auto it = key_lines.find(key);
        return it == key_lines.end() ? std::string("config: ") : line_prefix(it->second);
    };
    const auto positive_int = [&](const std::string& key, long long min) {
        if (cfg.get_int(key) < min)
            errors.push_back(where(key) + "key '" + key + "': must be >= " + std::to_string(min));
    };
    const auto positive_real = [&](const std::string& key) {
        if (!(cfg.get_real(key) > 0.0)) errors.push_back(where(key) + "key '" + key + "': must be positive");
    };
    switch (cfg.experiment) {
    case Experiment::projective: {
        positive_int("N", 1);
        positive_int("k", 1);
        positive_int("n_steps", 1);
        positive_real("dt_micro");
        positive_real("dt_macro");
        if (!errors.empty()) return;
        projective::CoarseStepConfig c{cfg.get_int("N"), cfg.get_int("k"), cfg.get_real("dt_micro"),
                                       cfg.get_real("dt_macro"), cfg.get_real("alpha")};
        try {
            c.validate();
        } catch (const Error& e) {
            const std::string msg = e.what();
            const std::string key = msg.find("alpha") != std::string::npos ? "alpha" : "dt_macro";
            errors.push_back(where(key) + "key '" + key + "': " +
                             msg.substr(msg.find(": ") == std::string::npos ? 0 : msg.find(": ") + 2));
        }
        break;
    }
    case Experiment::patch: {
        positive_int("n_points", 3);
        positive_int("probe_steps", 10);
        const double h = cfg.get_real("h_ratio");
        if (!(h > 0.0 && h < 1.0)) errors.push_back(where("h_ratio") + "key 'h_ratio': must lie in (0, 1)");
        const double r = cfg.get_real("dt_micro_ratio");
        if (!(r > 0.0 && r <= 1.0))
            errors.push_back(where("dt_micro_ratio") + "key 'dt_micro_ratio': must lie in (0, 1]");
        const auto w = cfg.get_int("wind_sign");
        if (w != 1 && w != -1) errors.push_back(where("wind_sign") + "key 'wind_sign': must be +1 or -1");
        if (cfg.get_list("convergence_grids").size() < 3)
            errors.push_back(where("convergence_grids") + "key 'convergence_grids': needs >= 3 grids");
        positive_real("T");
        break;
    }
    case Experiment::order_detect: {
        positive_int("d_max", 0);
        positive_int("arity", 1);
        positive_int("stop_after", 1);
        positive_int("n_base", 1);
        positive_int("n_perturb", 2);
        positive_real("dt_micro");
        positive_real("h");
        if (cfg.get_real("threshold") < 0.0)
            errors.push_back(where("threshold") + "key 'threshold': must be >= 0 (0 selects the automatic rule)");
        break;
    }
    case Experiment::kp: {
        positive_int("n_trajectories", static_cast<long long>(kp::min_ensemble));
        positive_int("n_modes", 1);
        positive_int("output_every", 1);
        positive_int("n_lags", 3);
        positive_real("T");
        positive_real("dt");
        for (double d : cfg.get_list("deltas"))
            if (!(d > 0.0)) errors.push_back(where("deltas") + "key 'deltas': every delta must be positive");
        for (const char* key : {"diffusive_range", "ballistic_range"})
            if (cfg.get_list(key).size() != 2)
                errors.push_back(where(key) + "key '" + key + "': needs exactly two values lo,hi");
        break;
    }
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& text, std::optional<Experiment> subcommand) {
    std::vector<RawLine> lines;
    std::vector<std::string> errors;
    std::optional<std::pair<std::string, int>> named;

    {
        std::istringstream in(text);
        std::string raw;
        std::string section;
        int n = 0;
        while (std::getline(in, raw)) {
            ++n;
            const auto hash = raw.find('#');
            const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') {
                    errors.push_back(line_prefix(n) + "malformed section header");
                    continue;
                }
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                errors.push_back(line_prefix(n) + "expected 'key = value'");
                continue;
            }
            RawLine rl{n, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
            if (rl.section.empty() && rl.key == "experiment") {
                named = {rl.value, n};
                continue;
            }
            lines.push_back(std::move(rl));
        }
    }

    ExperimentConfig cfg;
    if (named) {
        auto e = experiment_from_string(named->first);
        if (!e) throw ConfigError({line_prefix(named->second) + "key 'experiment': unknown experiment '" +
                                   named->first + "'"});
        if (subcommand && *subcommand != *e)
            errors.push_back(line_prefix(named->second) + "key 'experiment': '" + named->first +
                             "' conflicts with subcommand '" + to_string(*subcommand) + "'");
        cfg.experiment = subcommand ? *subcommand : *e;
    } else if (subcommand) {
        cfg.experiment = *subcommand;
    } else {
        throw ConfigError({"config: no experiment named (use 'experiment = <name>' or a subcommand)"});
    }

    const auto& specs = schema(cfg.experiment);
    const std::string exp_section = to_string(cfg.experiment);
    std::map<std::string, int> key_lines;
    bool seen_seed = false, seen_out = false;
    for (const auto& rl : lines) {
        const std::string at = line_prefix(rl.line) + "key '" + rl.key + "': ";
        if (rl.section == "run") {
            if (rl.key == "seed") {
                if (seen_seed) errors.push_back(at + "duplicate key");
                seen_seed = true;
                std::uint64_t s = 0;
                auto [ptr, ec] = std::from_chars(rl.value.data(), rl.value.data() + rl.value.size(), s);
                if (ec != std::errc() || ptr != rl.value.data() + rl.value.size() || rl.value.empty())
                    errors.push_back(at + "expected an unsigned 64-bit integer");
                else
                    cfg.seed = s;
            } else if (rl.key == "output_dir") {
                if (seen_out) errors.push_back(at + "duplicate key");
                seen_out = true;
                if (rl.value.empty()) errors.push_back(at + "must not be empty");
                cfg.output_dir = rl.value;
            } else {
                errors.push_back(at + "unknown key in [run]");
            }
            continue;
        }
        if (rl.section != exp_section) {
            errors.push_back(at + (rl.section.empty() ? std::string("key outside any section")
                                                      : "section [" + rl.section + "] does not belong to experiment '" +
                                                            exp_section + "'"));
            continue;
        }
        auto spec = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.key == rl.key; });
        if (spec == specs.end()) {
            errors.push_back(at + "unknown key");
            continue;
        }
        if (key_lines.count(rl.key)) {
            errors.push_back(at + "duplicate key (first set on line " + std::to_string(key_lines[rl.key]) + ")");
            continue;
        }
        key_lines[rl.key] = rl.line;
        auto value = parse_value(*spec, rl.value);
        if (!value) {
            errors.push_back(at + "expected " + kind_name(*spec) + ", got '" + rl.value + "'");
            continue;
        }
        cfg.parameters[rl.key] = std::move(*value);
    }

    for (const auto& spec : specs) {
        if (cfg.parameters.count(spec.key) || key_lines.count(spec.key)) continue;
        if (spec.fallback)
            cfg.parameters[spec.key] = *spec.fallback;
        else
            errors.push_back("config: key '" + spec.key + "': required in [" + exp_section + "]");
    }

    if (errors.empty()) check_cross_fields(cfg, key_lines, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

// ---------------------------------------------------------------------------
// experiments

bool RunRecord::all_passed() const {
    return std::none_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.verdict == "fail"; });
}

namespace {

void info(RunRecord& r, const std::string& name, double value) { r.metrics.push_back({name, value, "n/a", "info"}); }

void check(RunRecord& r, const std::string& name, double value, const std::string& tolerance, bool ok) {
    r.metrics.push_back({name, value, tolerance, ok ? "pass" : "fail"});
}

std::string fmt(double v) { return format_number(v); }

void run_projective(const ExperimentConfig& cfg, RunRecord& rec, unsigned threads) {
    const projective::CoarseStepConfig c{cfg.get_int("N"), cfg.get_int("k"), cfg.get_real("dt_micro"),
                                         cfg.get_real("dt_macro"), cfg.get_real("alpha")};
    const double sigma = cfg.get_real("noise_amplitude");
    const double theta = cfg.get_real("theta");
    const bool ou = cfg.get_string("drift") == "ou";
    const auto model = ou ? micro::SdeModel::ornstein_uhlenbeck(theta, sigma) : micro::SdeModel::zero_drift(sigma);
    const long long n_steps = cfg.get_int("n_steps");
    const double se_tol = cfg.get_real("moment_tolerance_se");
    const double var_tol = cfg.get_real("variance_tolerance");

    const double predicted_std = projective::effective_noise_std(c, sigma);
    const double ratio = static_cast<double>(c.N) * c.window() / c.dt_macro;
    info(rec, "effective_noise_std_predicted", predicted_std);
    info(rec, "consistent_noise_std", sigma * std::sqrt(c.dt_macro));
    info(rec, "ensemble_window_over_macro_step", ratio);

    const auto traj = projective::run_coarse_trajectory(cfg.get_real("x0"), model, c, n_steps, {cfg.seed, 0, 0},
                                                        threads);
    Table table{{"step", "time", "x"}, {}};
    for (std::size_t i = 0; i < traj.values.size(); ++i)
        table.rows.push_back({static_cast<double>(i), static_cast<double>(i) * c.dt_macro, traj.values[i]});
    rec.tables["trajectory"] = std::move(table);

    const double horizon = static_cast<double>(traj.ledger.macro_steps_total) * c.dt_macro;
    info(rec, "ledger_micro_steps_total", static_cast<double>(traj.ledger.micro_steps_total));
    info(rec, "ledger_macro_steps_total", static_cast<double>(traj.ledger.macro_steps_total));
    long long brute = -1;
    try {
        brute = projective::brute_force_micro_steps(horizon, c.dt_micro);
    } catch (const Error& e) {
        rec.notes.push_back(std::string("brute-force count: ") + e.what());
    }
    if (brute > 0) {
        info(rec, "brute_force_micro_steps", static_cast<double>(brute));
        info(rec, "cost_ratio_vs_brute_force", static_cast<double>(traj.ledger.micro_steps_total) / brute);
    }
    const bool consistent = std::abs(ratio - 1.0) <= 1e-9;
    if (consistent && brute > 0)
        check(rec, "cost_parity", static_cast<double>(traj.ledger.micro_steps_total - brute), "exact",
              traj.ledger.micro_steps_total == brute);

    if (traj.divergence_step) {
        rec.notes.push_back("trajectory diverged at macro step " + std::to_string(*traj.divergence_step));
        check(rec, "diverged_at_step", static_cast<double>(*traj.divergence_step), "none", false);
        return;
    }

    if (!ou) {
        const auto m = analysis::increment_moments(traj.values, c.dt_macro);
        check(rec, "increment_std", m.std_per_step, fmt(se_tol) + "SE=" + fmt(se_tol * m.se_std),
              std::abs(m.std_per_step - predicted_std) <= se_tol * m.se_std);
        check(rec, "increment_mean_rate", m.mean_rate, fmt(se_tol) + "SE=" + fmt(se_tol * m.se_mean_rate),
              std::abs(m.mean_rate) <= se_tol * m.se_mean_rate);
        return;
    }

    // AR(1): x' = (1 - theta dt) x + s xi has stationary variance s^2 / (1 - (1 - theta dt)^2)
    const double phi = 1.0 - theta * c.dt_macro;
    const double law_var = predicted_std * predicted_std / (1.0 - phi * phi);
    const double consistent_var = sigma * sigma * c.dt_macro / (1.0 - phi * phi);
    const auto law = analysis::stationary_variance_test(traj.values, law_var, var_tol);
    check(rec, "tail_variance_vs_law", law.measured, "rel " + fmt(var_tol) + " of " + fmt(law_var), law.pass);
    const auto cons = analysis::stationary_variance_test(traj.values, consistent_var, var_tol);
    rec.metrics.push_back({"tail_variance_vs_consistent", cons.measured, "rel " + fmt(var_tol) + " of " +
                           fmt(consistent_var), cons.pass ? "match" : "mismatch"});
    check(rec, "regime_prediction", consistent ? 1.0 : 0.0,
          consistent ? "consistent expected" : "inconsistent expected", cons.pass == consistent);
    info(rec, "drift_coefficient_estimate", analysis::drift_regression(traj.values, c.dt_macro));
}

struct PatchSetup {
    PdeSpec pde;
    int order;
    std::function<double(double, double)> exact;
};

PatchSetup patch_setup(const ExperimentConfig& cfg) {
    const std::string& name = cfg.get_string("pde");
    const double a = cfg.get_real("coefficient");
    if (name == "heat")
        return {PdeSpec::heat(a), 2, [a](double x, double t) { return std::exp(-a * t) * std::sin(x); }};
    if (name == "advection")
        return {PdeSpec::advection(a), 1, [a](double x, double t) { return std::sin(x - a * t); }};
    return {PdeSpec::biharmonic(a), 4, [a](double x, double t) { return std::exp(-a * t) * std::sin(x); }};
}

patch::PatchConfig patch_config(const ExperimentConfig& cfg, const PatchSetup& setup, double dx, double dt_macro) {
    patch::PatchConfig pc;
    const std::string& lifting = cfg.get_string("lifting");
    pc.lifting.variant = lifting == "central_d2"  ? patch::LiftingVariant::central_d2
                         : lifting == "upwind_d2" ? patch::LiftingVariant::upwind_d2
                                                  : patch::LiftingVariant::central_d4;
    pc.lifting.wind_sign = static_cast<int>(cfg.get_int("wind_sign"));
    pc.dt_macro = dt_macro;
    pc.dt_micro = cfg.get_real("dt_micro_ratio") * dt_macro;
    pc.alpha = cfg.get_real("alpha");
    pc.tooth.h = cfg.get_real("h_ratio") * dx;
    if (cfg.get_string("evolution") == "fd_buffered") {
        pc.evolution = patch::Evolution::fd_buffered;
        pc.grid.dx = cfg.get_real("dx_micro_ratio") * pc.tooth.h;
        pc.grid.dt = 0.9 * micro::max_stable_micro_step(setup.pde, pc.grid.dx);
        const double ratio = cfg.get_real("buffer_ratio");
        pc.tooth.H = ratio > 0.0 ? ratio * dx
                                 : pc.tooth.h + 3.0 * micro::influence_radius(setup.pde, pc.dt_micro) + 4.0 * pc.grid.dx;
    }
    return pc;
}

double default_cfl(int order) { return order == 1 ? 0.5 : order == 2 ? 0.4 : 0.1; }

void run_patch(const ExperimentConfig& cfg, RunRecord& rec, unsigned threads) {
    const PatchSetup setup = patch_setup(cfg);
    const double cfl = cfg.get_real("cfl") > 0.0 ? cfg.get_real("cfl") : default_cfl(setup.order);
    const double a = std::abs(cfg.get_real("coefficient"));
    const auto n = static_cast<std::size_t>(cfg.get_int("n_points"));
    const double dx = 2.0 * std::numbers::pi / static_cast<double>(n);
    const double dt_macro = cfl * std::pow(dx, setup.order) / a;
    const auto pc = patch_config(cfg, setup, dx, dt_macro);
    info(rec, "dx", dx);
    info(rec, "dt_macro", dt_macro);
    info(rec, "dt_micro", pc.dt_micro);

    const analysis::Stepper step = [&](const MacroState& U) {
        return patch::gap_tooth_step(U, setup.pde, pc, threads);
    };
    const auto probe = analysis::growth_factor_probe(step, analysis::seeded_white_noise(n, dx, cfg.seed),
                                                     static_cast<int>(cfg.get_int("probe_steps")));
    const double symbol = analysis::max_amplification(step, n, dx);
    info(rec, "von_neumann_max_amplification", symbol);
    const double gtol = cfg.get_real("growth_tolerance");
    check(rec, "growth_factor_per_step", probe.growth_factor_per_step, "rel " + fmt(gtol) + " of symbol max",
          std::abs(probe.growth_factor_per_step - symbol) <= gtol * symbol);
    info(rec, "probe_steps_run", probe.steps_run);
    rec.notes.push_back(std::string("stability verdict: ") + analysis::to_string(probe.classified));
    const std::string expected = cfg.get_string("expect_stability");
    const double code = probe.classified == analysis::Stability::stable     ? 0.0
                        : probe.classified == analysis::Stability::marginal ? 1.0
                                                                            : 2.0;
    if (expected == "any")
        info(rec, "stability_class", code);
    else
        check(rec, "stability_class", code, "expect " + expected, expected == analysis::to_string(probe.classified));

    if (probe.classified == analysis::Stability::unstable) {
        rec.notes.push_back("convergence study skipped: scheme is unstable");
        if (cfg.get_real("expect_order") >= 0.0)
            check(rec, "fitted_order", std::nan(""), "skipped (unstable)", false);
        return;
    }
    std::vector<std::size_t> grids;
    for (double g : cfg.get_list("convergence_grids")) grids.push_back(static_cast<std::size_t>(g));
    const double T = cfg.get_real("T");
    const analysis::DiscretizationFactory factory = [&](double h, double t_end) {
        const double dt_max = cfl * std::pow(h, setup.order) / a;
        const auto steps = static_cast<long long>(std::ceil(t_end / dt_max - 1e-9));
        const auto local = patch_config(cfg, setup, h, t_end / static_cast<double>(steps));
        return analysis::Discretization{
            [local, &setup, threads](const MacroState& U) { return patch::gap_tooth_step(U, setup.pde, local, threads); },
            steps};
    };
    const auto conv = analysis::convergence_order(grids, factory, setup.exact, T, 2.0 * std::numbers::pi);
    Table table{{"n_points", "dx", "error"}, {}};
    for (std::size_t i = 0; i < conv.grid_sizes.size(); ++i)
        table.rows.push_back({static_cast<double>(conv.grid_sizes[i]), conv.dx[i], conv.errors[i]});
    rec.tables["convergence"] = std::move(table);
    for (const auto& w : conv.warnings) rec.notes.push_back(w);
    const double expect_order = cfg.get_real("expect_order");
    const double otol = cfg.get_real("order_tolerance");
    if (expect_order >= 0.0)
        check(rec, "fitted_order", conv.fitted_order, fmt(expect_order) + "+-" + fmt(otol),
              std::abs(conv.fitted_order - expect_order) <= otol);
    else
        info(rec, "fitted_order", conv.fitted_order);
}

void run_order_detect(const ExperimentConfig& cfg, RunRecord& rec) {
    const std::string& target = cfg.get_string("target");
    order::BlackBoxFunction f;
    if (target == "adversarial") {
        const auto arity = static_cast<int>(cfg.get_int("arity"));
        f.arity = arity;
        f.first_index = 1;
        f.evaluator = [arity](std::span<const double> x) { return x[0] + x[arity - 1]; };
        rec.notes.push_back("black box: f(x_1..x_" + std::to_string(arity) + ") = x_1 + x_" + std::to_string(arity));
    } else {
        const PdeSpec pde = target == "heat" ? PdeSpec::heat() : target == "advection" ? PdeSpec::advection()
                                                                                      : PdeSpec::biharmonic();
        order::DerivativeProbeConfig dc;
        dc.d_max = static_cast<int>(cfg.get_int("d_max"));
        dc.dt_micro = cfg.get_real("dt_micro");
        dc.h = cfg.get_real("h");
        f = order::derivative_blackbox(pde, dc);
        rec.notes.push_back("black box: restricted micro time derivative, arguments D_0..D_" +
                            std::to_string(dc.d_max));
    }
    f.evaluation_budget = cfg.get_int("budget");
    order::ProbeSpec probe;
    probe.n_base = static_cast<int>(cfg.get_int("n_base"));
    probe.n_perturb = static_cast<int>(cfg.get_int("n_perturb"));
    probe.seed = cfg.seed;
    order::DetectOptions opts;
    if (cfg.get_real("threshold") > 0.0) opts.threshold = cfg.get_real("threshold");
    opts.stop_after = static_cast<int>(cfg.get_int("stop_after"));

    const auto report = order::detect_order(f, probe, opts);
    Table table{{"index", "variance", "dependent"}, {}};
    for (std::size_t i = 0; i < report.per_index_variance.size(); ++i) {
        if (std::isnan(report.per_index_variance[i])) continue;
        table.rows.push_back({static_cast<double>(report.first_index + static_cast<int>(i)),
                              report.per_index_variance[i], report.dependent[i] ? 1.0 : 0.0});
    }
    rec.tables["variances"] = std::move(table);
    info(rec, "threshold_used", report.threshold_used);
    info(rec, "budget_used", static_cast<double>(report.budget_used));
    info(rec, "stop_index", report.stop_index);
    if (report.budget_exhausted) check(rec, "budget_exhausted", 1.0, "none", false);

    const long long expect = cfg.get_int("expect_order");
    if (expect >= 0)
        check(rec, "detected_order", report.detected_order, "exact " + std::to_string(expect),
              report.detected_order == expect);
    else
        info(rec, "detected_order", report.detected_order);
    const std::string& early = cfg.get_string("expect_stopped_early");
    if (early == "any")
        info(rec, "stopped_early", report.stopped_early ? 1.0 : 0.0);
    else
        check(rec, "stopped_early", report.stopped_early ? 1.0 : 0.0, "expect " + early,
              report.stopped_early == (early == "true"));
}

void run_kp(const ExperimentConfig& cfg, RunRecord& rec, unsigned threads) {
    const auto n_traj = static_cast<std::size_t>(cfg.get_int("n_trajectories"));
    const int n_modes = static_cast<int>(cfg.get_int("n_modes"));
    const double spectrum = cfg.get_real("spectrum");
    const double T = cfg.get_real("T");
    const double dt = cfg.get_real("dt");
    const double v0 = cfg.get_real("v0");
    const kp::IntegrateOptions opts{static_cast<int>(cfg.get_int("output_every")), true, 0.01};
    const double lag_min = cfg.get_real("lag_min_fraction") * T;
    const double lag_max = cfg.get_real("lag_max_fraction") * T;
    rec.notes.push_back("force field: cosine-series surrogate (kappa_m = m, a_m = m^-spectrum, random phases)");

    std::vector<kp::RandomForceField> fields(n_traj);
    std::vector<double> x0(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        fields[i] = kp::synthesize_force_field(n_modes, spectrum, random_bits({cfg.seed, 1, i}));
        x0[i] = 2.0 * std::numbers::pi * uniform01({cfg.seed, 2, i});
    }

    Table table{{"delta", "lag", "msd"}, {}};
    for (double delta : cfg.get_list("deltas")) {
        const std::string label = "gamma_delta_" + fmt(delta);
        std::vector<kp::ScaledTrajectory> ensemble(n_traj);
        kp::MsdFit fit;
        try {
            parallel_for(n_traj, threads, [&](std::size_t i) {
                ensemble[i] = kp::kp_integrate(fields[i], delta, T, dt, x0[i], v0, opts);
            });
            fit = kp::msd_exponent(ensemble, lag_min, lag_max, static_cast<int>(cfg.get_int("n_lags")));
        } catch (const Error& e) {
            rec.notes.push_back("delta " + fmt(delta) + ": " + e.what());
            check(rec, label, std::nan(""), "run failed", false);
            continue;
        }
        for (std::size_t i = 0; i < fit.lags.size(); ++i) table.rows.push_back({delta, fit.lags[i], fit.msd[i]});
        info(rec, "fit_residual_delta_" + fmt(delta), fit.residual);
        const auto range_check = [&](const char* delta_key, const char* range_key) {
            if (delta != cfg.get_real(delta_key)) return false;
            const auto& r = cfg.get_list(range_key);
            check(rec, label, fit.gamma, "[" + fmt(r[0]) + "," + fmt(r[1]) + "]", fit.gamma >= r[0] && fit.gamma <= r[1]);
            return true;
        };
        if (!range_check("diffusive_delta", "diffusive_range") && !range_check("ballistic_delta", "ballistic_range"))
            info(rec, label, fit.gamma);
    }
    rec.tables["msd"] = std::move(table);
}

} // namespace

RunRecord run_experiment(const ExperimentConfig& cfg, unsigned threads) {
    RunRecord rec;
    rec.config_echo = cfg.echo();
    const auto start = std::chrono::steady_clock::now();
    try {
        switch (cfg.experiment) {
        case Experiment::projective: run_projective(cfg, rec, threads); break;
        case Experiment::patch: run_patch(cfg, rec, threads); break;
        case Experiment::order_detect: run_order_detect(cfg, rec); break;
        case Experiment::kp: run_kp(cfg, rec, threads); break;
        }
    } catch (const Error& e) {
        rec.notes.push_back(std::string("experiment aborted: ") + e.what());
        check(rec, "experiment_completed", 0.0, "n/a", false);
    }
    rec.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

// ---------------------------------------------------------------------------
// output

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::invalid_argument, "cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw Error(ErrorCode::invalid_argument, "write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::invalid_argument, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string render_summary(const RunRecord& r) {
    std::ostringstream os;
    os << "# " << r.version << "\n";
    os << "metric value tolerance verdict\n";
    for (const auto& m : r.metrics)
        os << m.name << ' ' << format_number(m.value) << ' ' << m.tolerance << ' ' << m.verdict << "\n";
    for (const auto& n : r.notes) os << "# note: " << n << "\n";
    os << "# overall: " << (r.all_passed() ? "pass" : "fail") << "\n";
    return os.str();
}

std::string render_table(const Table& t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            os << (i ? "," : "") << buf;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace

void write_results(const RunRecord& record, const std::filesystem::path& dir, bool force) {
    std::map<std::string, std::string> files;
    files["summary.txt"] = render_summary(record);
    files["config.txt"] = record.config_echo;
    for (const auto& [stem, table] : record.tables) files[stem + ".csv"] = render_table(table);

    std::filesystem::create_directories(dir);
    if (!force) {
        std::vector<std::string> clashes;
        for (const auto& [name, _] : files)
            if (std::filesystem::exists(dir / name)) clashes.push_back(name);
        if (!clashes.empty()) {
            std::string list;
            for (const auto& c : clashes) list += " " + c;
            throw Error(ErrorCode::invalid_argument,
                        "refusing to overwrite existing results in " + dir.string() + ":" + list + " (use --force)");
        }
    }
    for (const auto& [name, content] : files) write_file(dir / name, content);
}

} // namespace eqf::cli
