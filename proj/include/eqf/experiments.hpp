#pragma once

// Experiment runner behind the command-line tool: line-based config parsing,
// the four canonical experiments and deterministic result files.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace eqf::cli {

inline constexpr const char* artifact_version = "eqf-lab 0.1.0";

enum class Experiment { projective, patch, order_detect, kp };

const char* to_string(Experiment e) noexcept;
std::optional<Experiment> experiment_from_string(const std::string& name);

using ParamValue = std::variant<long long, double, bool, std::string, std::vector<double>>;

struct ExperimentConfig {
    Experiment experiment = Experiment::projective;
    std::map<std::string, ParamValue> parameters; // every schema key, defaults applied
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "results";

    long long get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;
    const std::vector<double>& get_list(const std::string& key) const;
    /// Normalized `key = value` text of the full configuration.
    std::string echo() const;
};

/// Every violation found while parsing, one message per entry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> messages);
    const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
    std::vector<std::string> messages_;
};

/// Parses `key = value` lines with `[run]` and `[<experiment>]` sections.
/// `subcommand`, when given, selects the experiment; a conflicting
/// `experiment = ...` line is an error.
ExperimentConfig parse_config(const std::string& text, std::optional<Experiment> subcommand = std::nullopt);

struct Metric {
    std::string name;
    double value = 0.0;
    std::string tolerance; // "n/a" for informational values
    std::string verdict;   // pass | fail | info
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct RunRecord {
    std::string config_echo;
    std::string version = artifact_version;
    double wall_time_seconds = 0.0;
    std::vector<Metric> metrics;
    std::map<std::string, Table> tables; // file stem -> table
    std::vector<std::string> notes;      // captured module errors and labels

    bool all_passed() const;
};

RunRecord run_experiment(const ExperimentConfig& cfg, unsigned threads = 1);

/// Writes summary.txt, config.txt and <stem>.csv for each table. Existing
/// files are only replaced when `force` is set.
void write_results(const RunRecord& record, const std::filesystem::path& dir, bool force);

std::string format_number(double v);

} // namespace eqf::cli
