#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tblm/codec.hpp"
#include "tblm/evaluator.hpp"
#include "tblm/rng.hpp"
#include "tblm/telescope.hpp"

namespace tblm {

enum class Strategy { first_improving, best_move };
enum class RestartPolicy { none, repeated };
enum class Sparsity { off, prefer_nonzero };
enum class InitStrategy { full_random, bounded_random, telescopic_grid };

std::string_view to_string(Strategy s) noexcept;
std::string_view to_string(RestartPolicy r) noexcept;
std::string_view to_string(InitStrategy i) noexcept;
std::string_view to_string(Sparsity s) noexcept;
Strategy parse_strategy(std::string_view s);
RestartPolicy parse_restart(std::string_view s);
InitStrategy parse_init(std::string_view s);
Sparsity parse_sparsity(std::string_view s);

/// Stopping rules; a zero field is inactive, at least one must be active.
struct Budget {
    double seconds = 0.0;
    std::uint64_t max_moves = 0;
    std::uint64_t max_probes = 0;
};

struct SearchConfig {
    Strategy strategy = Strategy::first_improving;
    RestartPolicy restart = RestartPolicy::none;
    Sparsity sparsity = Sparsity::off;
    InitStrategy init = InitStrategy::bounded_random;
    double w_init = 0.01;
    std::uint64_t seed = 1;
    Budget budget{};
    /// Accepted moves between validation events.
    std::uint64_t validate_every = 100;
    /// Keep one StepRecord per accepted move.
    bool record_steps = false;
    /// A move improves when its objective change is below
    /// -improvement_tol * max(1, |objective|).
    double improvement_tol = 1e-12;
    std::optional<TelescopeConfig> telescope;
    /// Checked at every validation event; returning true ends the search.
    std::function<bool(const Evaluator&)> stop_when;

    void validate(const WeightFormat& format) const;
};

/// Initial genome. full_random draws every bit uniformly; bounded_random
/// rounds a uniform draw in [-w_init, w_init] to the grid; telescopic_grid
/// draws uniformly among the values in [-w_init, w_init] whose locked
/// (n - n_unlocked) Gray bits are all zero. With prefer_nonzero sparsity each
/// weight is then zeroed with probability 1/2.
BitGenome initialize(const ParameterLayout& layout, const WeightFormat& format, const SearchConfig& config,
                     int n_unlocked, Rng& rng);

struct Exploration {
    std::optional<std::size_t> move;
    double delta = 0.0;
    /// Probes spent, including the successful one.
    std::size_t probes = 0;
};

/// Probes `bits` in a fresh uniformly random order and stops at the first
/// strict improvement. `bits` is used as the working permutation: the first
/// `probes` entries are the probed order afterwards.
Exploration explore_first_improving(Evaluator& ev, std::span<std::size_t> bits, Rng& rng, double tol = 0.0);

/// As explore_first_improving, but bits of nonzero weights are all tried
/// before any bit of a zero weight. `probed`, when given, receives the probe
/// order.
Exploration explore_first_improving_sparse(Evaluator& ev, std::span<const std::size_t> bits, Rng& rng,
                                           double tol = 0.0, std::vector<std::size_t>* probed = nullptr);

/// Probes every bit; returns the largest decrease, ties broken uniformly.
Exploration explore_best(Evaluator& ev, std::span<const std::size_t> bits, Rng& rng, double tol = 0.0);

struct StepRecord {
    double time = 0.0;
    std::uint64_t accepted = 0;
    double train_loss = 0.0;
    double fraction = 0.0;
    int n_unlocked = 0;
    std::size_t move = 0;
    std::size_t probes = 0;
};

struct TraceEvent {
    double time = 0.0;
    std::uint64_t accepted = 0;
    std::uint64_t probes = 0;
    int n_unlocked = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double mean_fraction = 0.0;
    std::uint64_t restarts = 0;
};

struct UnlockEvent {
    double time = 0.0;
    std::uint64_t accepted = 0;
    int n_unlocked = 0;
    bool by_threshold = false;
};

enum class StopReason { local_minimum, budget, stop_condition };
std::string_view to_string(StopReason r) noexcept;

struct RunTrace {
    std::vector<TraceEvent> events;
    std::vector<StepRecord> steps;
    std::vector<UnlockEvent> unlocks;
    std::uint64_t accepted = 0;
    std::uint64_t probes = 0;
    std::uint64_t restarts = 0;
    double seconds = 0.0;
    StopReason reason = StopReason::budget;
    std::optional<BitGenome> best_genome;
    double best_validation = 0.0;
    double final_train_loss = 0.0;
    double final_validation_loss = 0.0;
};

/// Local search over `ev`'s genome layout: initialize, then explore, commit
/// and record until the budget ends, a local minimum with nothing left to
/// unlock is reached (without restarts), or `stop_when` fires. The evaluator
/// holds the final genome afterwards.
RunTrace run(Evaluator& ev, const SearchConfig& config);

}  // namespace tblm
