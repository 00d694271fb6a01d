#include "tblm/app.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "tblm/evalcache.hpp"
#include "tblm/rng.hpp"

namespace tblm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Stream indices for Rng::split of the run seed.
constexpr std::uint64_t kTrainBatchStream = 1;
constexpr std::uint64_t kValidationBatchStream = 2;
constexpr std::uint64_t kTestBatchStream = 3;
constexpr std::uint64_t kSplitStream = 4;

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << std::setprecision(17);
    return f;
}

void close_out(std::ofstream& f, const fs::path& path) {
    f.flush();
    if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string header_line(const RunSpec& spec) { return "# spec: " + to_json(spec); }

std::vector<double> controller_weights_for(const BitGenome& g) { return {g.weights().begin(), g.weights().end()}; }

}  // namespace

std::string_view to_string(TaskType t) noexcept {
    switch (t) {
        case TaskType::two_spirals: return "two-spirals";
        case TaskType::csv: return "csv";
        case TaskType::pendulum: return "pendulum";
    }
    return "?";
}

TaskType parse_task(std::string_view s) {
    if (s == "two-spirals" || s == "spirals") return TaskType::two_spirals;
    if (s == "csv") return TaskType::csv;
    if (s == "pendulum") return TaskType::pendulum;
    throw std::invalid_argument("unknown task '" + std::string(s) + "' (expected two-spirals, csv or pendulum)");
}

// --- RunSpec ---

Topology RunSpec::topology() const {
    if (arch.empty()) throw std::logic_error("architecture not resolved");
    return Topology::parse(arch, parse_transfer(hidden_transfer), parse_transfer(output_transfer), recurrent.value_or(false));
}

SearchConfig RunSpec::search_config() const {
    SearchConfig c;
    c.strategy = strategy;
    c.restart = restart;
    c.sparsity = sparsity;
    c.init = init;
    c.w_init = w_init.value();
    c.seed = seed;
    c.budget = {budget_seconds, max_moves, max_probes};
    c.validate_every = validate_every;
    c.record_steps = record_steps;
    if (telescopic) {
        TelescopeConfig t;
        t.n_start = n_start;
        t.n_max = bits.value();
        t.trigger = trigger;
        t.phi = phi;
        t.eta = eta;
        c.telescope = t;
    }
    return c;
}

SimConfig RunSpec::sim_config() const {
    SimConfig c;
    c.gravity = gravity;
    c.horizon = horizon;
    return c;
}

void RunSpec::validate() {
    auto bad = [](const std::string& flag, const std::string& why) {
        throw std::invalid_argument(flag + ": " + why);
    };
    const bool pend = task == TaskType::pendulum;
    if (!recurrent) recurrent = pend && feedback == FeedbackMode::derivative_free;
    if (arch.empty()) {
        if (task == TaskType::two_spirals) arch = "2-20-20-1";
        if (pend) arch = feedback == FeedbackMode::complete ? "4-5-1" : "2-10-1";
    }
    if (output_transfer.empty()) output_transfer = pend ? "linear" : "logistic";
    if (!bits) bits = pend ? 16 : 12;
    if (!w_max) w_max = pend ? 10.0 : 6.0;
    if (!w_init) w_init = pend ? 0.01 : 0.001;

    if (*bits < WeightFormat::kMinBits || *bits > WeightFormat::kMaxBits) bad("--bits", "must be in [2, 24]");
    if (!(*w_max > 0.0) || !std::isfinite(*w_max)) bad("--wmax", "must be positive");
    const WeightFormat f(*bits, *w_max);
    if (!(*w_init > 0.0)) bad("--init-range", "must be positive");
    if (init != InitStrategy::full_random && *w_init < f.epsilon()) {
        warnings.push_back("--init-range " + fmt(*w_init) + " is below the discretization step " + fmt(f.epsilon()) +
                           "; raised to the step");
        w_init = f.epsilon();
    }
    if (!(phi >= 0.0 && phi <= 1.0)) bad("--phi", "must be in [0, 1]");
    if (!(eta >= 0.0 && eta < 1.0)) bad("--eta", "must be in [0, 1)");
    if (n_start < 1 || n_start > *bits) bad("--n-start", "must be in [1, bits]");
    if (!(budget_seconds >= 0.0) || !std::isfinite(budget_seconds)) bad("--budget", "must be >= 0");
    if (budget_seconds == 0.0 && max_moves == 0 && max_probes == 0)
        bad("--budget", "one of --budget, --max-moves, --max-probes must be positive");
    if (validate_every == 0) bad("--validate-every", "must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("--train-fraction", "must be in (0, 1)");
    if (!(reg >= 0.0)) bad("--reg", "must be >= 0");
    if (grid_resolution < 2) bad("--grid-res", "must be >= 2");
    if (hist_bins < 1) bad("--hist-bins", "must be >= 1");
    if (trajectories < 0) bad("--trajectories", "must be >= 0");
    if (trajectory_stride < 1) bad("--trajectory-stride", "must be >= 1");
    if (restarts < 0) bad("--restarts", "must be >= 0");
    if (jobs < 0) bad("--jobs", "must be >= 0");
    if (!(success_threshold > 0.0)) bad("--success-threshold", "must be positive");
    if (!(stop_accuracy >= 0.0 && stop_accuracy <= 1.0)) bad("--stop-accuracy", "must be in [0, 1]");
    try {
        (void)parse_transfer(hidden_transfer);
    } catch (const std::exception& e) {
        bad("--hidden-transfer", e.what());
    }
    try {
        (void)parse_transfer(output_transfer);
    } catch (const std::exception& e) {
        bad("--output-transfer", e.what());
    }
    if (loss == LossKind::cross_entropy && parse_transfer(output_transfer) != Transfer::logistic)
        bad("--loss", "cross-entropy needs a logistic output layer");

    if (task == TaskType::csv) {
        if (csv_path.empty()) bad("--csv", "required for the csv task");
        if (csv_schema.empty()) bad("--schema", "required for the csv task");
        (void)parse_schema(csv_schema);
    }
    if (pend) {
        if (batch < 1) bad("--batch", "must be >= 1");
        if (!(horizon > 1.0)) bad("--horizon", "must exceed the 1 s transient");
        if (!(test_horizon > 1.0)) bad("--test-horizon", "must exceed the 1 s transient");
        if (!(gravity >= 0.0)) bad("--gravity", "must be >= 0");
        if (loss != LossKind::rmse) bad("--loss", "the pendulum objective is Err; leave --loss at rmse");
    } else {
        if (*recurrent) bad("--recurrent", "recurrent networks are only supported for the pendulum task");
        if (stop_accuracy > 0.0 && loss == LossKind::rmse && output_transfer == "linear")
            warnings.push_back("--stop-accuracy with a linear output thresholds at 0.5");
    }
    if (!arch.empty()) {
        try {
            Topology t = topology();
            if (pend && (t.n_inputs() != feedback_inputs(feedback) || t.n_outputs() != 1))
                bad("--arch", arch + " does not fit " + std::string(to_string(feedback)) + " feedback (" +
                                  std::to_string(feedback_inputs(feedback)) + " inputs, 1 output)");
            if (task == TaskType::two_spirals && (t.n_inputs() != 2 || t.n_outputs() != 1))
                bad("--arch", "two-spirals needs 2 inputs and 1 output");
        } catch (const std::invalid_argument& e) {
            const std::string what = e.what();
            if (what.rfind("--arch", 0) == 0) throw;
            bad("--arch", what);
        }
    }
}

std::string to_json(const RunSpec& s) {
    json j;
    j["task"] = to_string(s.task);
    j["csv_path"] = s.csv_path;
    j["csv_schema"] = s.csv_schema;
    j["train_fraction"] = s.train_fraction;
    j["feedback"] = to_string(s.feedback);
    j["arch"] = s.arch;
    j["hidden_transfer"] = s.hidden_transfer;
    j["output_transfer"] = s.output_transfer;
    j["recurrent"] = opt(s.recurrent);
    j["bits"] = opt(s.bits);
    j["w_max"] = opt(s.w_max);
    j["telescopic"] = s.telescopic;
    j["n_start"] = s.n_start;
    j["trigger"] = to_string(s.trigger);
    j["phi"] = s.phi;
    j["eta"] = s.eta;
    j["strategy"] = to_string(s.strategy);
    j["restart"] = to_string(s.restart);
    j["sparsity"] = to_string(s.sparsity);
    j["init"] = to_string(s.init);
    j["w_init"] = opt(s.w_init);
    j["seed"] = s.seed;
    j["budget_seconds"] = s.budget_seconds;
    j["max_moves"] = s.max_moves;
    j["max_probes"] = s.max_probes;
    j["validate_every"] = s.validate_every;
    j["record_steps"] = s.record_steps;
    j["stop_accuracy"] = s.stop_accuracy;
    j["loss"] = to_string(s.loss);
    j["reg"] = s.reg;
    j["batch"] = s.batch;
    j["horizon"] = s.horizon;
    j["test_horizon"] = s.test_horizon;
    j["gravity"] = s.gravity;
    j["grid_resolution"] = s.grid_resolution;
    j["hist_bins"] = s.hist_bins;
    j["trajectories"] = s.trajectories;
    j["trajectory_stride"] = s.trajectory_stride;
    j["restarts"] = s.restarts;
    j["success_threshold"] = s.success_threshold;
    return j.dump();
}

RunSpec spec_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunSpec s;
    s.task = parse_task(j.at("task").get<std::string>());
    s.csv_path = j.value("csv_path", "");
    s.csv_schema = j.value("csv_schema", "");
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.feedback = parse_feedback(j.value("feedback", "complete"));
    s.arch = j.value("arch", "");
    s.hidden_transfer = j.value("hidden_transfer", s.hidden_transfer);
    s.output_transfer = j.value("output_transfer", "");
    s.recurrent = opt_from<bool>(j, "recurrent");
    s.bits = opt_from<int>(j, "bits");
    s.w_max = opt_from<double>(j, "w_max");
    s.telescopic = j.value("telescopic", false);
    s.n_start = j.value("n_start", s.n_start);
    s.trigger = parse_trigger(j.value("trigger", "local-min"));
    s.phi = j.value("phi", s.phi);
    s.eta = j.value("eta", s.eta);
    s.strategy = parse_strategy(j.value("strategy", "first"));
    s.restart = parse_restart(j.value("restart", "none"));
    s.sparsity = parse_sparsity(j.value("sparsity", "off"));
    s.init = parse_init(j.value("init", "bounded"));
    s.w_init = opt_from<double>(j, "w_init");
    s.seed = j.value("seed", s.seed);
    s.budget_seconds = j.value("budget_seconds", s.budget_seconds);
    s.max_moves = j.value("max_moves", s.max_moves);
    s.max_probes = j.value("max_probes", s.max_probes);
    s.validate_every = j.value("validate_every", s.validate_every);
    s.record_steps = j.value("record_steps", false);
    s.stop_accuracy = j.value("stop_accuracy", 0.0);
    s.loss = parse_loss(j.value("loss", "rmse"));
    s.reg = j.value("reg", 0.0);
    s.batch = j.value("batch", s.batch);
    s.horizon = j.value("horizon", s.horizon);
    s.test_horizon = j.value("test_horizon", s.test_horizon);
    s.gravity = j.value("gravity", s.gravity);
    s.grid_resolution = j.value("grid_resolution", s.grid_resolution);
    s.hist_bins = j.value("hist_bins", s.hist_bins);
    s.trajectories = j.value("trajectories", s.trajectories);
    s.trajectory_stride = j.value("trajectory_stride", s.trajectory_stride);
    s.restarts = j.value("restarts", 0);
    s.success_threshold = j.value("success_threshold", s.success_threshold);
    return s;
}

// --- command line ---

namespace {

template <class E>
CLI::Option* add_enum(CLI::App* app, const std::string& name, E& target, E (*parse)(std::string_view),
                      const std::string& help) {
    return app
        ->add_option_function<std::string>(
            name, [&target, parse, name](const std::string& v) {
                try {
                    target = parse(v);
                } catch (const std::invalid_argument& e) {
                    throw CLI::ValidationError(name, e.what());
                }
            },
            help)
        ->type_name("TEXT");
}

void add_train_options(CLI::App* app, RunSpec& s) {
    add_enum(app, "--task", s.task, &parse_task, "two-spirals | csv | pendulum");
    app->add_option("--csv", s.csv_path, "CSV file (csv task)");
    app->add_option("--schema", s.csv_schema, "column roles, e.g. input,nom,target or ...,class");
    app->add_option("--train-fraction", s.train_fraction, "training share of the csv rows")->check(CLI::Range(0.0, 1.0));
    add_enum(app, "--mode", s.feedback, &parse_feedback, "pendulum feedback: complete | derivative-free");

    app->add_option("--arch", s.arch, "layer sizes, e.g. 2-20-20-1");
    app->add_option("--hidden-transfer", s.hidden_transfer, "tanh | logistic | linear");
    app->add_option("--output-transfer", s.output_transfer, "tanh | logistic | linear");
    app->add_flag("--recurrent,!--no-recurrent", s.recurrent, "hidden-to-hidden recurrence (pendulum)");

    app->add_option("--bits", s.bits, "bits per weight");
    app->add_option("--wmax", s.w_max, "largest representable weight");

    app->add_flag("--telescopic", s.telescopic, "start from the most significant bits");
    app->add_option("--n-start", s.n_start, "initially unlocked bits per weight");
    add_enum(app, "--trigger", s.trigger, &parse_trigger, "unlock trigger: local-min | threshold");
    app->add_option("--phi", s.phi, "improving-move fraction threshold")->check(CLI::Range(0.0, 1.0));
    app->add_option("--eta", s.eta, "moving-average decay")->check(CLI::Range(0.0, 1.0));

    add_enum(app, "--strategy", s.strategy, &parse_strategy, "first | best");
    add_enum(app, "--restart", s.restart, &parse_restart, "none | repeated");
    add_enum(app, "--sparsity", s.sparsity, &parse_sparsity, "off | nonzero");
    add_enum(app, "--init", s.init, &parse_init, "full | bounded | grid");
    app->add_option("--init-range", s.w_init, "initial weight range w_init");
    app->add_option("--seed", s.seed, "random seed");
    app->add_option("--budget", s.budget_seconds, "wall-clock budget in seconds (0 = none)");
    app->add_option("--max-moves", s.max_moves, "accepted-move cap (0 = none)");
    app->add_option("--max-probes", s.max_probes, "probe cap (0 = none)");
    app->add_option("--validate-every", s.validate_every, "accepted moves between validation events");
    app->add_flag("--record-steps", s.record_steps, "write steps.csv with one row per accepted move");
    app->add_option("--stop-accuracy", s.stop_accuracy, "stop once training accuracy reaches this");

    add_enum(app, "--loss", s.loss, &parse_loss, "rmse | ce");
    app->add_option("--reg", s.reg, "regularization coefficient");

    app->add_option("--batch", s.batch, "pendulum simulations per batch");
    app->add_option("--horizon", s.horizon, "pendulum training horizon (s)");
    app->add_option("--test-horizon", s.test_horizon, "pendulum test horizon (s)");
    app->add_option("--gravity", s.gravity, "m/s^2");

    app->add_option("--out", s.out_dir, "output directory (default $TBLM_OUT_DIR or ./tblm_out)");
    app->add_option("--grid-res", s.grid_resolution, "decision-surface grid resolution");
    app->add_option("--hist-bins", s.hist_bins, "weight histogram bins");
    app->add_option("--trajectories", s.trajectories, "pendulum test trajectories to dump");
    app->add_option("--trajectory-stride", s.trajectory_stride, "integration steps between dumped rows");

    app->add_option("--restarts", s.restarts, "independent seeded runs with summary statistics");
    app->add_option("--jobs", s.jobs, "concurrent runs for --restarts (0 = hardware threads)");
    app->add_option("--success-threshold", s.success_threshold, "test error counted as success");
}

std::string default_out_dir() {
    if (const char* env = std::getenv("TBLM_OUT_DIR"); env && *env) return env;
    return "tblm_out";
}

}  // namespace

ParsedArgs parse_and_validate(int argc, const char* const* argv) {
    ParsedArgs out;
    CLI::App app{"Telescopic binary learning machine: local search over Gray-coded network weights", "tblm"};
    app.set_config("--config", "", "TOML file with option values");
    app.require_subcommand(1);
    CLI::App* train = app.add_subcommand("train", "train a network and write artifacts");
    add_train_options(train, out.spec);
    CLI::App* rep = app.add_subcommand("replay", "re-evaluate a saved genome.json");
    rep->add_option("--genome", out.genome_path, "genome.json written by train")->required();
    rep->add_option("--out", out.replay_out, "directory for report.json and trajectory.csv");
    rep->add_flag("--final", out.replay_final, "use the final genome instead of the best-validation one");

    if (argc <= 1) throw CliError("no command given", 2, app.help());
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        throw CliError("help", 0, app.help());
    } catch (const CLI::CallForAllHelp&) {
        throw CliError("help", 0, app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::ParseError& e) {
        throw CliError(e.what(), 2, app.help());
    }
    if (*rep) {
        out.command = Command::replay;
        return out;
    }
    out.command = Command::train;
    if (out.spec.out_dir.empty()) out.spec.out_dir = default_out_dir();
    try {
        out.spec.validate();
    } catch (const std::invalid_argument& e) {
        throw CliError(e.what(), 2, train->help());
    }
    return out;
}

// --- tasks ---

std::optional<double> Task::train_accuracy() const {
    if (!train) return std::nullopt;
    const auto* ev = dynamic_cast<const DatasetEvaluator*>(evaluator.get());
    if (!ev) return std::nullopt;
    return accuracy(ev->cache().network_outputs(), train->targets, train->n_outputs);
}

Task build_task(const RunSpec& spec_in) {
    RunSpec spec = spec_in;
    if (!spec.bits) spec.validate();
    const WeightFormat format = spec.format();
    const LossSpec loss{spec.loss, spec.reg};
    const Rng root(spec.seed);
    std::vector<std::string> warnings;

    switch (spec.task) {
        case TaskType::two_spirals: {
            auto ts = two_spirals();
            Topology topo = spec.topology();
            auto ev = std::make_unique<DatasetEvaluator>(topo, loss, ts.train, ts.test, BitGenome(format, topo.layout()));
            return Task{spec, topo, std::move(ts.train), std::move(ts.test), {}, {}, warnings, std::move(ev)};
        }
        case TaskType::csv: {
            const auto roles = parse_schema(spec.csv_schema);
            Dataset all = load_csv(spec.csv_path, roles);
            Rng rng = root.split(kSplitStream);
            SplitResult split = normalize_split(all, spec.train_fraction, rng);
            warnings = split.warnings;
            if (spec.arch.empty())
                spec.arch = std::to_string(all.n_inputs) + "-10-" + std::to_string(all.n_outputs);
            Topology topo = spec.topology();
            if (topo.n_inputs() != all.n_inputs || topo.n_outputs() != all.n_outputs)
                throw std::invalid_argument("--arch: " + spec.arch + " does not match the data (" +
                                            std::to_string(all.n_inputs) + " inputs, " +
                                            std::to_string(all.n_outputs) + " outputs)");
            auto ev = std::make_unique<DatasetEvaluator>(topo, loss, split.train, split.validation,
                                                         BitGenome(format, topo.layout()));
            return Task{spec, topo, std::move(split.train), std::move(split.validation), {}, {}, warnings, std::move(ev)};
        }
        case TaskType::pendulum: {
            Topology topo = spec.topology();
            const SimConfig sim = spec.sim_config();
            Rng tr = root.split(kTrainBatchStream), va = root.split(kValidationBatchStream);
            auto train_angles = draw_initial_angles(tr, spec.batch, sim.theta0_range);
            auto val_angles = draw_initial_angles(va, spec.batch, sim.theta0_range);
            auto ev = std::make_unique<ControlEvaluator>(topo, spec.feedback, sim, loss, train_angles, val_angles,
                                                         BitGenome(format, topo.layout()));
            return Task{spec, topo, std::nullopt, std::nullopt, std::move(train_angles), std::move(val_angles),
                        warnings, std::move(ev)};
        }
    }
    throw std::logic_error("unhandled task");
}

ControlTest test_controller(const RunSpec& spec, const BitGenome& genome, std::size_t count,
                            std::vector<std::vector<TrajectoryPoint>>* trajectories) {
    const Topology topo = spec.topology();
    SimConfig sim = spec.sim_config();
    sim.horizon = spec.test_horizon;
    Rng rng = Rng(spec.seed).split(kTestBatchStream);
    const auto angles = draw_initial_angles(rng, count, sim.theta0_range);
    const auto w = controller_weights_for(genome);
    ControlTest t;
    t.count = count;
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<TrajectoryPoint>* traj = nullptr;
        if (trajectories && i < trajectories->size()) traj = &(*trajectories)[i];
        const SimResult r = simulate(topo, w, spec.feedback, angles[i], sim, traj);
        sum += r.err;
        if (!r.diverged && r.max_abs_theta < std::numbers::pi / 2) ++t.upright;
        t.results.push_back(r);
    }
    t.mean_err = count ? sum / static_cast<double>(count) : 0.0;
    return t;
}

// --- genome files ---

void write_genome_json(const fs::path& path, const RunSpec& spec, const Topology& topo, const BitGenome& best,
                       const BitGenome* final_genome, std::optional<double> best_validation,
                       std::optional<double> final_validation) {
    json j;
    j["format"] = {{"n_bits", best.format().n_bits()},
                   {"w_max", best.format().w_max()},
                   {"epsilon", best.format().epsilon()}};
    j["arch"] = topo.arch_string();
    j["recurrent"] = topo.recurrent();
    j["n_weights"] = best.n_weights();
    j["best_validation"] = opt(best_validation);
    j["final_validation"] = opt(final_validation);
    j["multipliers"] = std::vector<std::int32_t>(best.multipliers().begin(), best.multipliers().end());
    if (final_genome)
        j["final_multipliers"] =
            std::vector<std::int32_t>(final_genome->multipliers().begin(), final_genome->multipliers().end());
    j["spec"] = json::parse(to_json(spec));
    auto f = open_out(path);
    f << j.dump(1) << '\n';
    close_out(f, path);
}

LoadedGenome read_genome_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open genome file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error("genome file " + path.string() + " is not valid JSON: " + e.what());
    }
    try {
        RunSpec spec = spec_from_json(j.at("spec").dump());
        spec.validate();
        const WeightFormat f = spec.format();
        const auto& jf = j.at("format");
        if (jf.at("n_bits").get<int>() != f.n_bits() || jf.at("w_max").get<double>() != f.w_max())
            throw std::runtime_error("format header does not match the spec");
        const Topology topo = spec.topology();
        auto read = [&](const json& arr) {
            const auto hs = arr.get<std::vector<std::int32_t>>();
            if (hs.size() != topo.n_weights())
                throw std::runtime_error("expected " + std::to_string(topo.n_weights()) + " multipliers for " +
                                         topo.arch_string() + ", found " + std::to_string(hs.size()));
            BitGenome g(f, topo.layout());
            g.set_multipliers(hs);
            return g;
        };
        LoadedGenome out{spec, read(j.at("multipliers")), std::nullopt};
        if (j.contains("final_multipliers")) out.final_genome = read(j.at("final_multipliers"));
        return out;
    } catch (const json::exception& e) {
        throw std::runtime_error("genome file " + path.string() + ": " + e.what());
    } catch (const std::logic_error& e) {
        throw std::runtime_error("genome file " + path.string() + ": " + e.what());
    }
}

// --- artifacts ---

namespace {

void write_trace(const fs::path& path, const RunSpec& spec, const RunTrace& t) {
    auto f = open_out(path);
    f << header_line(spec) << '\n';
    f << "time_s,accepted,probes,n_unlocked,train_loss,validation_loss,mean_fraction,restarts\n";
    for (const auto& e : t.events)
        f << e.time << ',' << e.accepted << ',' << e.probes << ',' << e.n_unlocked << ',' << e.train_loss << ','
          << e.validation_loss << ',' << e.mean_fraction << ',' << e.restarts << '\n';
    close_out(f, path);
}

void write_unlocks(const fs::path& path, const RunSpec& spec, const RunTrace& t) {
    auto f = open_out(path);
    f << header_line(spec) << '\n';
    f << "time_s,accepted,n_unlocked,trigger\n";
    for (const auto& u : t.unlocks)
        f << u.time << ',' << u.accepted << ',' << u.n_unlocked << ',' << (u.by_threshold ? "threshold" : "local-min")
          << '\n';
    close_out(f, path);
}

void write_steps(const fs::path& path, const RunSpec& spec, const RunTrace& t) {
    auto f = open_out(path);
    f << header_line(spec) << '\n';
    f << "time_s,accepted,train_loss,fraction,n_unlocked,bit,probes\n";
    for (const auto& s : t.steps)
        f << s.time << ',' << s.accepted << ',' << s.train_loss << ',' << s.fraction << ',' << s.n_unlocked << ','
          << s.move << ',' << s.probes << '\n';
    close_out(f, path);
}

void write_histogram(const fs::path& path, const RunSpec& spec, const BitGenome& g, int bins) {
    const double lo = g.format().min_weight(), hi = g.format().w_max();
    std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
    for (double w : g.weights()) {
        auto b = static_cast<std::size_t>(std::floor((w - lo) / (hi - lo) * bins));
        count[std::min(b, count.size() - 1)]++;
    }
    auto f = open_out(path);
    f << header_line(spec) << '\n';
    f << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b)
        f << lo + (hi - lo) * b / bins << ',' << lo + (hi - lo) * (b + 1) / bins << ',' << count[b] << '\n';
    close_out(f, path);
}

void write_grid(const fs::path& path, const RunSpec& spec, const Topology& topo, const BitGenome& g, int res) {
    auto f = open_out(path);
    f << header_line(spec) << '\n';
    f << "x,y,output\n";
    Activations act;
    for (int i = 0; i < res; ++i)
        for (int k = 0; k < res; ++k) {
            const double in[2] = {-1.0 + 2.0 * i / (res - 1), -1.0 + 2.0 * k / (res - 1)};
            forward_into(topo, g.weights(), in, {}, act);
            f << in[0] << ',' << in[1] << ',' << act.o.back()[0] << '\n';
        }
    close_out(f, path);
}

void write_trajectories(const fs::path& path, const RunSpec& spec, const std::vector<std::vector<TrajectoryPoint>>& trajs,
                        int stride) {
    auto f = open_out(path);
    f << header_line(spec) << '\n';
    f << "sim,t,x,x_dot,theta,theta_dot,force\n";
    for (std::size_t s = 0; s < trajs.size(); ++s)
        for (std::size_t i = 0; i < trajs[s].size(); i += static_cast<std::size_t>(stride)) {
            const auto& p = trajs[s][i];
            f << s << ',' << p.t << ',' << p.x << ',' << p.x_dot << ',' << p.theta << ',' << p.theta_dot << ','
              << p.force << '\n';
        }
    close_out(f, path);
}

void write_dataset(const fs::path& path, const RunSpec& spec, const Dataset& d) { write_csv(d, path, "spec: " + to_json(spec)); }

}  // namespace

RunOutput execute(const RunSpec& spec_in, std::ostream& log) {
    RunSpec spec = spec_in;
    spec.validate();
    for (const auto& w : spec.warnings) log << "warning: " << w << '\n';
    Task task = build_task(spec);
    spec = task.spec;
    for (const auto& w : task.warnings) log << "warning: " << w << '\n';

    SearchConfig cfg = spec.search_config();
    if (spec.stop_accuracy > 0.0 && task.train) {
        const Task* tp = &task;
        const double target = spec.stop_accuracy;
        cfg.stop_when = [tp, target](const Evaluator&) { return tp->train_accuracy().value_or(0.0) >= target; };
    }

    RunOutput out;
    out.trace = run(*task.evaluator, cfg);
    const RunTrace& tr = out.trace;
    const BitGenome& best = *tr.best_genome;
    const BitGenome final_genome = task.evaluator->genome();

    const fs::path dir = spec.out_dir.empty() ? fs::path(".") : fs::path(spec.out_dir);
    try {
        fs::create_directories(dir);
        auto file = [&](const char* name) {
            out.files.push_back(dir / name);
            return out.files.back();
        };
        write_trace(file("trace.csv"), spec, tr);
        write_unlocks(file("unlocks.csv"), spec, tr);
        if (spec.record_steps) write_steps(file("steps.csv"), spec, tr);
        write_genome_json(file("genome.json"), spec, task.topology, best, &final_genome, tr.best_validation,
                          tr.final_validation_loss);
        write_histogram(file("weights_hist.csv"), spec, best, spec.hist_bins);

        json summary;
        summary["stop_reason"] = to_string(tr.reason);
        summary["accepted"] = tr.accepted;
        summary["probes"] = tr.probes;
        summary["restarts"] = tr.restarts;
        summary["seconds"] = tr.seconds;
        summary["final_train_loss"] = tr.final_train_loss;
        summary["final_validation_loss"] = tr.final_validation_loss;
        summary["best_validation_loss"] = tr.best_validation;

        if (task.train) {
            if (task.topology.n_inputs() == 2)
                write_grid(file("grid.csv"), spec, task.topology, best, spec.grid_resolution);
            write_dataset(file("train_normalized.csv"), spec, *task.train);
            write_dataset(file("validation_normalized.csv"), spec, *task.validation);
            if (auto acc = task.train_accuracy()) summary["final_train_accuracy"] = *acc;
            const auto pred = predict(task.topology, best.weights(), *task.validation);
            summary["best_validation_accuracy"] = accuracy(pred, task.validation->targets, task.validation->n_outputs);
            out.test_error = tr.best_validation;
        } else {
            std::vector<std::vector<TrajectoryPoint>> trajs(static_cast<std::size_t>(spec.trajectories));
            const ControlTest test = test_controller(spec, best, spec.batch, &trajs);
            out.test_error = test.mean_err;
            summary["test_err"] = test.mean_err;
            summary["test_upright"] = test.upright;
            summary["test_count"] = test.count;
            std::size_t diverged = 0;
            for (const auto& r : test.results) diverged += r.diverged;
            if (diverged) log << "warning: " << diverged << " of " << test.count << " test simulations diverged\n";
            if (spec.trajectories > 0) write_trajectories(file("trajectory.csv"), spec, trajs, spec.trajectory_stride);
        }
        summary["test_error"] = out.test_error;
        summary["spec"] = json::parse(to_json(spec));
        auto f = open_out(file("summary.json"));
        f << summary.dump(1) << '\n';
        close_out(f, dir / "summary.json");

        log << "stop: " << to_string(tr.reason) << ", accepted " << tr.accepted << ", probes " << tr.probes
            << ", restarts " << tr.restarts << ", " << std::fixed << std::setprecision(2) << tr.seconds << " s\n"
            << std::defaultfloat << std::setprecision(6) << "final train loss " << tr.final_train_loss
            << ", best validation " << tr.best_validation << ", test error " << out.test_error << '\n';
        log << "artifacts in " << dir.string() << '\n';
    } catch (const fs::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        out.exit_code = 1;
    } catch (const std::runtime_error& e) {
        log << "error: " << e.what() << '\n';
        out.exit_code = 1;
    }
    return out;
}

ReplayReport replay(const fs::path& genome_file, bool use_final) {
    LoadedGenome lg = read_genome_json(genome_file);
    if (use_final && !lg.final_genome) throw std::runtime_error("genome file has no final genome");
    const BitGenome& g = use_final ? *lg.final_genome : lg.best;
    Task task = build_task(lg.spec);
    task.evaluator->reset(g);
    ReplayReport r;
    r.spec = task.spec;
    r.train_loss = task.evaluator->objective();
    r.validation_loss = task.evaluator->validation_loss();
    if (task.train) {
        r.train_accuracy = task.train_accuracy();
        const auto pred = predict(task.topology, g.weights(), *task.validation);
        r.validation_accuracy = accuracy(pred, task.validation->targets, task.validation->n_outputs);
    } else {
        const ControlTest t = test_controller(task.spec, g, task.spec.batch);
        r.test_err = t.mean_err;
        r.test_upright = t.upright;
        r.test_count = t.count;
        double m = 0.0;
        for (const auto& s : t.results) m = std::max(m, s.max_abs_theta);
        r.test_max_abs_theta = m;
    }
    return r;
}

std::string to_json(const ReplayReport& r) {
    json j;
    j["train_loss"] = r.train_loss;
    j["validation_loss"] = r.validation_loss;
    j["train_accuracy"] = opt(r.train_accuracy);
    j["validation_accuracy"] = opt(r.validation_accuracy);
    j["test_err"] = opt(r.test_err);
    j["test_max_abs_theta"] = opt(r.test_max_abs_theta);
    j["test_upright"] = r.test_upright;
    j["test_count"] = r.test_count;
    j["test_horizon"] = r.spec.task == TaskType::pendulum ? json(r.spec.test_horizon) : json(nullptr);
    j["spec"] = json::parse(to_json(r.spec));
    return j.dump(1);
}

// --- restarts ---

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

RestartSummary run_restarts(const RunSpec& spec_in, std::ostream& log) {
    RunSpec spec = spec_in;
    spec.validate();
    if (spec.restarts < 1) throw std::invalid_argument("--restarts: must be >= 1");
    const fs::path dir = spec.out_dir.empty() ? fs::path(".") : fs::path(spec.out_dir);
    fs::create_directories(dir);

    const auto n = static_cast<std::size_t>(spec.restarts);
    std::vector<RestartRow> rows(n);
    std::vector<int> failed(n, 0);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            RunSpec s = spec;
            s.restarts = 0;
            s.seed = spec.seed + i;
            std::ostringstream name;
            name << "run_" << std::setw(3) << std::setfill('0') << i;
            s.out_dir = (dir / name.str()).string();
            std::ostringstream run_log;
            const RunOutput o = execute(s, run_log);
            rows[i] = {static_cast<int>(i), s.seed, o.trace.best_validation, o.test_error, o.trace.seconds,
                       o.trace.accepted};
            failed[i] = o.exit_code;
            std::lock_guard lock(log_mutex);
            log << "run " << i << " seed " << s.seed << ": best validation " << o.trace.best_validation
                << ", test error " << o.test_error << ", " << o.trace.seconds << " s\n";
        }
    };
    unsigned jobs = spec.jobs > 0 ? static_cast<unsigned>(spec.jobs) : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t + 1 < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (std::any_of(failed.begin(), failed.end(), [](int c) { return c != 0; }))
        throw std::runtime_error("at least one restart failed to write its artifacts");

    RestartSummary sum;
    sum.rows = rows;
    sum.runs = n;
    const Topology topo = [&] {
        Task t = build_task(spec);
        return t.topology;
    }();
    sum.hidden_units = topo.n_layers() > 1 ? topo.layer_size(1) : 0;
    std::vector<double> errs, secs;
    for (const auto& r : rows) {
        errs.push_back(r.test_error);
        secs.push_back(r.seconds);
        if (r.test_error < spec.success_threshold) ++sum.successes;
    }
    sum.minimum = *std::min_element(errs.begin(), errs.end());
    sum.first_quartile = quantile(errs, 0.25);
    sum.median_seconds = quantile(secs, 0.5);

    {
        const fs::path p = dir / "restarts.csv";
        auto f = open_out(p);
        f << header_line(spec) << '\n';
        f << "run,seed,best_validation,test_error,seconds,accepted\n";
        for (const auto& r : rows)
            f << r.run << ',' << r.seed << ',' << r.best_validation << ',' << r.test_error << ',' << r.seconds << ','
              << r.accepted << '\n';
        close_out(f, p);
    }
    {
        const fs::path p = dir / "table.csv";
        auto f = open_out(p);
        f << header_line(spec) << '\n';
        f << "hidden_units,minimum,first_quartile,successes,median_time_s\n";
        f << sum.hidden_units << ',' << sum.minimum << ',' << sum.first_quartile << ',' << sum.successes << " / "
          << sum.runs << ',' << sum.median_seconds << '\n';
        close_out(f, p);
    }
    log << "hidden units | minimum | 1st quartile | # < " << spec.success_threshold << " | median time (s)\n"
        << sum.hidden_units << " | " << sum.minimum << " | " << sum.first_quartile << " | " << sum.successes << " / "
        << sum.runs << " | " << sum.median_seconds << '\n';
    return sum;
}

}  // namespace tblm
