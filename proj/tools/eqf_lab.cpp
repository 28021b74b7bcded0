// Command-line front end: eqf_lab <experiment> --config <file> [--seed N] [--out DIR] [--force] [--threads N]
// Exit status: 0 all checks pass, 1 a check failed or the run aborted, 2 configuration error.

#include "eqf/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int exit_pass = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_config_error = 2;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool force = false;
    unsigned threads = 1;
};

void add_common(CLI::App* sub, Options& opt) {
    sub->add_option("--config", opt.config, "configuration file")->required();
    sub->add_option("--seed", opt.seed, "override [run] seed");
    sub->add_option("--out", opt.out, "override [run] output_dir");
    sub->add_flag("--force", opt.force, "overwrite existing result files");
    sub->add_option("--threads", opt.threads, "worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 1024u));
}

int run(eqf::cli::Experiment experiment, const Options& opt) {
    std::ifstream in(opt.config);
    if (!in) {
        std::cerr << "config: cannot read " << opt.config << "\n";
        return exit_config_error;
    }
    std::stringstream text;
    text << in.rdbuf();

    eqf::cli::ExperimentConfig cfg;
    try {
        cfg = eqf::cli::parse_config(text.str(), experiment);
    } catch (const eqf::cli::ConfigError& e) {
        for (const auto& m : e.messages()) std::cerr << opt.config << ": " << m << "\n";
        return exit_config_error;
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.out) cfg.output_dir = *opt.out;
    if (!opt.force && std::filesystem::exists(cfg.output_dir / "summary.txt")) {
        std::cerr << "output: " << cfg.output_dir.string() << " already holds results (use --force)\n";
        return exit_config_error;
    }

    const auto record = eqf::cli::run_experiment(cfg, opt.threads);
    for (const auto& m : record.metrics)
        std::cout << m.name << ' ' << eqf::cli::format_number(m.value) << ' ' << m.tolerance << ' ' << m.verdict
                  << "\n";
    for (const auto& n : record.notes) std::cout << "note: " << n << "\n";
    std::cout << "wall time " << eqf::cli::format_number(record.wall_time_seconds) << " s\n";

    try {
        eqf::cli::write_results(record, cfg.output_dir, opt.force);
    } catch (const std::exception& e) {
        std::cerr << "output: " << e.what() << "\n";
        return exit_check_failed;
    }
    std::cout << "results written to " << cfg.output_dir.string() << "\n";
    return record.all_passed() ? exit_pass : exit_check_failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(eqf::cli::artifact_version) + ": equation-free multiscale experiments"};
    app.set_version_flag("--version", eqf::cli::artifact_version);
    app.require_subcommand(1);

    Options opt;
    std::optional<eqf::cli::Experiment> chosen;
    for (auto e : {eqf::cli::Experiment::projective, eqf::cli::Experiment::patch, eqf::cli::Experiment::order_detect,
                   eqf::cli::Experiment::kp}) {
        auto* sub = app.add_subcommand(eqf::cli::to_string(e));
        add_common(sub, opt);
        sub->callback([&chosen, e] { chosen = e; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_pass : exit_config_error;
    }
    return run(*chosen, opt);
}
