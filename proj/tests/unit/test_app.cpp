#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tblm/app.hpp"
#include "tblm/rng.hpp"

using namespace tblm;
namespace fs = std::filesystem;

namespace {

ParsedArgs parse(std::vector<const char*> args) {
    args.insert(args.begin(), "tblm");
    return parse_and_validate(static_cast<int>(args.size()), args.data());
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tblm_test_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> data_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

RunSpec small_spirals(const fs::path& out, std::uint64_t seed) {
    RunSpec s;
    s.arch = "2-6-1";
    s.telescopic = true;
    s.trigger = TriggerMode::threshold;
    s.max_moves = 300;
    s.budget_seconds = 0;
    s.validate_every = 25;
    s.seed = seed;
    s.grid_resolution = 12;
    s.out_dir = out.string();
    s.validate();
    return s;
}

}  // namespace

TEST_CASE("two-spirals flags from the protocol") {
    const ParsedArgs a = parse({"train", "--arch", "2-20-20-1", "--bits", "12", "--wmax", "6.0", "--init-range", "0.001", "--telescopic"});
    CHECK(a.command == Command::train);
    const RunSpec& s = a.spec;
    CHECK(s.task == TaskType::two_spirals);
    CHECK(s.topology().layer_sizes() == std::vector<std::size_t>{2, 20, 20, 1});
    CHECK(s.bits == 12);
    CHECK(s.w_max == 6.0);
    CHECK(s.telescopic);
    CHECK(s.n_start == 2);
    CHECK(s.phi == 0.10);
    CHECK(s.eta == 0.95);
    // 0.001 lies below the 12-bit step, so it is raised with a note
    CHECK(s.w_init.value() == doctest::Approx(6.0 / 2047));
    CHECK(s.warnings.size() == 1);
    const SearchConfig c = s.search_config();
    REQUIRE(c.telescope.has_value());
    CHECK(c.telescope->n_max == 12);
}

TEST_CASE("usage errors") {
    try {
        parse({"train", "--phi", "1.5"});
        FAIL("accepted phi 1.5");
    } catch (const CliError& e) {
        CHECK(e.exit_code != 0);
        CHECK(std::string(e.what()).find("--phi") != std::string::npos);
    }
    try {
        parse({});
        FAIL("accepted empty argv");
    } catch (const CliError& e) {
        CHECK(e.exit_code == 2);
        CHECK(e.usage_text.find("train") != std::string::npos);
    }
    try {
        parse({"train", "--help"});
        FAIL("help did not throw");
    } catch (const CliError& e) {
        CHECK(e.exit_code == 0);
    }
    CHECK_THROWS_AS(parse({"train", "--recurrent"}), CliError);
    CHECK_THROWS_AS(parse({"train", "--loss", "ce", "--task", "pendulum"}), CliError);
    CHECK_THROWS_AS(parse({"train", "--arch", "3-4-1"}), CliError);
    CHECK_THROWS_AS(parse({"train", "--task", "csv"}), CliError);
    CHECK_THROWS_AS(parse({"replay"}), CliError);
}

TEST_CASE("pendulum defaults per feedback mode") {
    const RunSpec c = parse({"train", "--task", "pendulum"}).spec;
    CHECK(c.topology().layer_sizes() == std::vector<std::size_t>{4, 5, 1});
    CHECK(c.bits == 16);
    CHECK(c.w_max == 10.0);
    CHECK(c.w_init == 0.01);
    CHECK(c.sim_config().horizon == 100.0);
    const RunSpec d = parse({"train", "--task", "pendulum", "--mode", "derivative-free"}).spec;
    CHECK(d.topology().recurrent());
    CHECK(d.topology().layer_sizes() == std::vector<std::size_t>{2, 10, 1});
}

TEST_CASE("spec json round trip") {
    RunSpec s = parse({"train", "--task", "pendulum", "--mode", "derivative-free", "--telescopic", "--trigger", "threshold",
                       "--seed", "17", "--reg", "0.25"})
                    .spec;
    const RunSpec back = spec_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
    CHECK(back.seed == 17);
    CHECK(back.trigger == TriggerMode::threshold);
    CHECK_THROWS(spec_from_json("{not json"));
}

TEST_CASE("quantile interpolates linearly") {
    CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
    CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7}, 0.5) == 7.0);
    CHECK_THROWS(quantile({}, 0.5));
}

TEST_CASE("execute writes deterministic artifacts") {
    const fs::path d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
    std::ostringstream log;
    const RunOutput r1 = execute(small_spirals(d1, 5), log);
    const RunOutput r2 = execute(small_spirals(d2, 5), log);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    for (const char* f : {"trace.csv", "genome.json", "grid.csv", "weights_hist.csv", "summary.json", "unlocks.csv"})
        CHECK(fs::exists(d1 / f));

    // identical apart from the wall-time column
    auto t1 = data_lines(d1 / "trace.csv"), t2 = data_lines(d2 / "trace.csv");
    REQUIRE(t1.size() == t2.size());
    REQUIRE(t1.size() > 3);
    for (std::size_t i = 0; i < t1.size(); ++i) {
        auto a = split(t1[i]), b = split(t2[i]);
        a.erase(a.begin());
        b.erase(b.begin());
        CHECK(a == b);
    }
    // train loss never increases
    const auto header = split(t1[0]);
    const auto col = static_cast<std::size_t>(std::find(header.begin(), header.end(), "train_loss") - header.begin());
    REQUIRE(col < header.size());
    for (std::size_t i = 2; i < t1.size(); ++i) CHECK(std::stod(split(t1[i])[col]) <= std::stod(split(t1[i - 1])[col]));

    // every file starts with the spec
    std::ifstream in(d1 / "grid.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("# spec: {", 0) == 0);
    CHECK(data_lines(d1 / "grid.csv").size() == 1 + 12 * 12);
    CHECK(data_lines(d1 / "weights_hist.csv").size() == 1 + 50);
}

TEST_CASE("replay reproduces the recorded validation losses") {
    const fs::path d = scratch_dir("replay");
    std::ostringstream log;
    const RunOutput r = execute(small_spirals(d, 9), log);
    REQUIRE(r.exit_code == 0);
    const ReplayReport best = replay(d / "genome.json");
    CHECK(std::fabs(best.validation_loss - r.trace.best_validation) <= 1e-9);
    const ReplayReport fin = replay(d / "genome.json", true);
    CHECK(std::fabs(fin.validation_loss - r.trace.final_validation_loss) <= 1e-9);
    CHECK(std::fabs(fin.train_loss - r.trace.final_train_loss) <= 1e-9);
    REQUIRE(fin.train_accuracy.has_value());
    CHECK(*fin.train_accuracy >= 0.0);
}

TEST_CASE("pendulum replay runs at the test horizon") {
    const fs::path d = scratch_dir("pend");
    RunSpec s = parse({"train", "--task", "pendulum", "--batch", "3", "--horizon", "4", "--test-horizon", "40", "--max-moves",
                       "15", "--budget", "0", "--validate-every", "5", "--seed", "3"})
                    .spec;
    s.out_dir = d.string();
    std::ostringstream log;
    const RunOutput r = execute(s, log);
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(d / "trajectory.csv"));
    const ReplayReport rep = replay(d / "genome.json");
    REQUIRE(rep.test_err.has_value());
    CHECK(rep.test_count == 3);
    CHECK(rep.spec.test_horizon == 40.0);

    // independent recomputation with the test stream and T = 40 s
    const LoadedGenome lg = read_genome_json(d / "genome.json");
    Rng rng = Rng(3).split(3);
    const auto angles = draw_initial_angles(rng, 3, 0.4);
    SimConfig sim = s.sim_config();
    sim.horizon = 40.0;
    const double want = fitness(lg.best, s.topology(), FeedbackMode::complete, sim, angles);
    CHECK(std::fabs(*rep.test_err - want) <= 1e-12 * std::max(1.0, want));
    sim.horizon = 4.0;
    CHECK(fitness(lg.best, s.topology(), FeedbackMode::complete, sim, angles) != want);
}

TEST_CASE("corrupted genome file gives a clean error") {
    const fs::path d = scratch_dir("corrupt");
    fs::create_directories(d);
    {
        std::ofstream(d / "bad.json") << "{\"format\": {\"n_bits\": 12";
    }
    CHECK_THROWS_AS(replay(d / "bad.json"), std::exception);
    CHECK_THROWS(replay(d / "missing.json"));
    std::ostringstream log;
    const RunOutput r = execute(small_spirals(d, 1), log);
    REQUIRE(r.exit_code == 0);
    std::ifstream in(d / "genome.json");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    const auto pos = text.find("\"multipliers\"");
    REQUIRE(pos != std::string::npos);
    // drop one multiplier: the file no longer matches its arch
    const auto open = text.find('[', pos), comma = text.find(',', open);
    text.erase(open + 1, comma - open);
    std::ofstream(d / "short.json") << text;
    CHECK_THROWS(replay(d / "short.json"));
}
