#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tblm/data.hpp"
#include "tblm/net.hpp"
#include "tblm/objective.hpp"
#include "tblm/pendulum.hpp"
#include "tblm/search.hpp"
#include "tblm/telescope.hpp"

namespace tblm {

enum class TaskType { two_spirals, csv, pendulum };

std::string_view to_string(TaskType t) noexcept;
TaskType parse_task(std::string_view s);

/// Everything needed to reproduce one training session.
struct RunSpec {
    TaskType task = TaskType::two_spirals;
    std::string csv_path;
    std::string csv_schema;
    double train_fraction = 0.70;
    FeedbackMode feedback = FeedbackMode::complete;

    // Unset optionals take the task default in validate().
    std::string arch;
    std::string hidden_transfer = "tanh";
    std::string output_transfer;
    std::optional<bool> recurrent;

    std::optional<int> bits;
    std::optional<double> w_max;

    bool telescopic = false;
    int n_start = 2;
    TriggerMode trigger = TriggerMode::local_minimum;
    double phi = 0.10;
    double eta = 0.95;

    Strategy strategy = Strategy::first_improving;
    RestartPolicy restart = RestartPolicy::none;
    Sparsity sparsity = Sparsity::off;
    InitStrategy init = InitStrategy::bounded_random;
    std::optional<double> w_init;
    std::uint64_t seed = 1;
    double budget_seconds = 60.0;
    std::uint64_t max_moves = 0;
    std::uint64_t max_probes = 0;
    std::uint64_t validate_every = 100;
    bool record_steps = false;
    /// Dataset tasks: stop once training accuracy reaches this (0 = off).
    double stop_accuracy = 0.0;

    LossKind loss = LossKind::rmse;
    double reg = 0.0;

    // pendulum
    std::size_t batch = 50;
    double horizon = 100.0;
    double test_horizon = 1000.0;
    double gravity = 9.81;

    // artifacts
    std::string out_dir;
    int grid_resolution = 100;
    int hist_bins = 50;
    int trajectories = 1;
    int trajectory_stride = 10;

    // restart statistics
    int restarts = 0;
    int jobs = 0;
    double success_threshold = 0.1;

    /// Notes produced while validating (e.g. adjusted values).
    std::vector<std::string> warnings;

    /// Valid after validate(); csv tasks also need a resolved arch.
    Topology topology() const;
    WeightFormat format() const { return WeightFormat(bits.value(), w_max.value()); }
    SearchConfig search_config() const;
    SimConfig sim_config() const;
    /// Checks consistency and fills task defaults. Throws std::invalid_argument
    /// with a message naming the offending option.
    void validate();
};

std::string to_json(const RunSpec& spec);
RunSpec spec_from_json(const std::string& text);

enum class Command { train, replay };

struct ParsedArgs {
    Command command = Command::train;
    RunSpec spec;
    // replay
    std::string genome_path;
    std::string replay_out;
    bool replay_final = false;
};

/// Usage problem or help request; exit_code 0 for help.
struct CliError : std::runtime_error {
    CliError(const std::string& msg, int code, std::string usage)
        : std::runtime_error(msg), exit_code(code), usage_text(std::move(usage)) {}
    int exit_code;
    std::string usage_text;
};
/// Parses `tblm <train|replay> [options]`, optionally reading a TOML file
/// given by --config; command-line flags override file values.
ParsedArgs parse_and_validate(int argc, const char* const* argv);

/// Task objects built from a spec: the evaluator and, for datasets, the data.
struct Task {
    RunSpec spec;
    Topology topology;
    std::optional<Dataset> train;
    std::optional<Dataset> validation;
    std::vector<double> train_angles;
    std::vector<double> validation_angles;
    std::vector<std::string> warnings;
    std::unique_ptr<Evaluator> evaluator;

    /// Training accuracy of the evaluator's genome (dataset tasks).
    std::optional<double> train_accuracy() const;
};

Task build_task(const RunSpec& spec);

struct RunOutput {
    int exit_code = 0;
    RunTrace trace;
    std::vector<std::filesystem::path> files;
    /// Test error of the best genome: pendulum Err at the test horizon on a
    /// fresh batch, else the validation loss.
    double test_error = 0.0;
};

/// Trains per spec and writes trace.csv, genome.json, weights_hist.csv and
/// the task-specific artifacts into spec.out_dir.
RunOutput execute(const RunSpec& spec, std::ostream& log);

struct ReplayReport {
    RunSpec spec;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    std::optional<double> train_accuracy;
    std::optional<double> validation_accuracy;
    std::optional<double> test_err;
    std::optional<double> test_max_abs_theta;
    std::size_t test_upright = 0;  // simulations keeping |theta| < pi/2
    std::size_t test_count = 0;
};

/// Re-evaluates a saved genome on its task; pendulum genomes are also run
/// on a fresh test batch at the test horizon.
ReplayReport replay(const std::filesystem::path& genome_file, bool use_final = false);
std::string to_json(const ReplayReport& r);

struct RestartRow {
    int run = 0;
    std::uint64_t seed = 0;
    double best_validation = 0.0;
    double test_error = 0.0;
    double seconds = 0.0;
    std::uint64_t accepted = 0;
};

struct RestartSummary {
    std::size_t hidden_units = 0;
    double minimum = 0.0;
    double first_quartile = 0.0;
    std::size_t successes = 0;
    std::size_t runs = 0;
    double median_seconds = 0.0;
    std::vector<RestartRow> rows;
};

/// R independent seeded runs (seed, seed+1, ...) executed on `jobs` threads;
/// writes restarts.csv and table.csv.
RestartSummary run_restarts(const RunSpec& spec, std::ostream& log);

/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// Pendulum test evaluation of a genome on a fresh batch at the test horizon.
struct ControlTest {
    double mean_err = 0.0;
    std::size_t upright = 0;
    std::size_t count = 0;
    std::vector<SimResult> results;
};
ControlTest test_controller(const RunSpec& spec, const BitGenome& genome, std::size_t count,
                            std::vector<std::vector<TrajectoryPoint>>* trajectories = nullptr);

/// Multipliers of the best-validation genome (and optionally the final
/// one) with the format header and the full spec.
void write_genome_json(const std::filesystem::path& path, const RunSpec& spec, const Topology& topo,
                       const BitGenome& best, const BitGenome* final_genome = nullptr,
                       std::optional<double> best_validation = {}, std::optional<double> final_validation = {});
struct LoadedGenome {
    RunSpec spec;
    BitGenome best;
    std::optional<BitGenome> final_genome;
};
LoadedGenome read_genome_json(const std::filesystem::path& path);

}  // namespace tblm
