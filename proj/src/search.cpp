#include "tblm/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace tblm {

std::string_view to_string(Strategy s) noexcept { return s == Strategy::best_move ? "best" : "first"; }
std::string_view to_string(RestartPolicy r) noexcept { return r == RestartPolicy::repeated ? "repeated" : "none"; }
std::string_view to_string(InitStrategy i) noexcept {
    switch (i) {
        case InitStrategy::full_random: return "full";
        case InitStrategy::bounded_random: return "bounded";
        case InitStrategy::telescopic_grid: return "grid";
    }
    return "?";
}
std::string_view to_string(Sparsity s) noexcept { return s == Sparsity::prefer_nonzero ? "nonzero" : "off"; }
std::string_view to_string(StopReason r) noexcept {
    switch (r) {
        case StopReason::local_minimum: return "local-minimum";
        case StopReason::budget: return "budget";
        case StopReason::stop_condition: return "stop-condition";
    }
    return "?";
}

Strategy parse_strategy(std::string_view s) {
    if (s == "first" || s == "first-improving") return Strategy::first_improving;
    if (s == "best" || s == "best-move") return Strategy::best_move;
    throw std::invalid_argument("unknown strategy '" + std::string(s) + "' (expected first or best)");
}

RestartPolicy parse_restart(std::string_view s) {
    if (s == "none") return RestartPolicy::none;
    if (s == "repeated") return RestartPolicy::repeated;
    throw std::invalid_argument("unknown restart policy '" + std::string(s) + "' (expected none or repeated)");
}

InitStrategy parse_init(std::string_view s) {
    if (s == "full" || s == "full-random") return InitStrategy::full_random;
    if (s == "bounded" || s == "bounded-random") return InitStrategy::bounded_random;
    if (s == "grid" || s == "telescopic-grid") return InitStrategy::telescopic_grid;
    throw std::invalid_argument("unknown init strategy '" + std::string(s) + "' (expected full, bounded or grid)");
}

Sparsity parse_sparsity(std::string_view s) {
    if (s == "off" || s == "none") return Sparsity::off;
    if (s == "nonzero" || s == "prefer-nonzero") return Sparsity::prefer_nonzero;
    throw std::invalid_argument("unknown sparsity mode '" + std::string(s) + "' (expected off or nonzero)");
}

void SearchConfig::validate(const WeightFormat& format) const {
    if (budget.seconds < 0.0 || !std::isfinite(budget.seconds)) throw std::invalid_argument("budget seconds must be finite and >= 0");
    if (budget.seconds <= 0.0 && budget.max_moves == 0 && budget.max_probes == 0)
        throw std::invalid_argument("search budget must be positive (seconds, moves or probes)");
    if (init != InitStrategy::full_random && w_init < format.epsilon())
        throw std::invalid_argument("initial weight range " + std::to_string(w_init) +
                                    " is below the discretization step " + std::to_string(format.epsilon()));
    if (validate_every == 0) throw std::invalid_argument("validation cadence must be >= 1");
    if (telescope) {
        telescope->validate();
        if (telescope->n_max != format.n_bits()) throw std::invalid_argument("telescope n_max must equal the bits per weight");
    }
}

namespace {

// Multipliers reachable from n_unlocked free Gray bits with the rest zero.
std::vector<std::int32_t> grid_candidates(const WeightFormat& format, int n_unlocked, double w_init) {
    const int n = format.n_bits();
    const int locked = n - n_unlocked;
    std::vector<std::int32_t> out;
    for (std::uint32_t prefix = 0; prefix < (std::uint32_t{1} << n_unlocked); ++prefix) {
        const std::int32_t h = gray_decode(prefix << locked, n);
        if (std::fabs(format.value_of(h)) <= w_init) out.push_back(h);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

BitGenome initialize(const ParameterLayout& layout, const WeightFormat& format, const SearchConfig& config,
                     int n_unlocked, Rng& rng) {
    BitGenome g(format, layout);
    const std::size_t n_w = g.n_weights();
    switch (config.init) {
        case InitStrategy::full_random: {
            const std::uint64_t mask = (std::uint64_t{1} << format.n_bits()) - 1;
            for (std::size_t w = 0; w < n_w; ++w) g.set_code(w, static_cast<std::uint32_t>(rng.next() & mask));
            break;
        }
        case InitStrategy::bounded_random: {
            if (config.w_init < format.epsilon())
                throw std::invalid_argument("bounded initialization needs w_init >= epsilon");
            for (std::size_t w = 0; w < n_w; ++w)
                g.set_multiplier(w, format.nearest_multiplier(rng.uniform(-config.w_init, config.w_init)));
            break;
        }
        case InitStrategy::telescopic_grid: {
            if (config.w_init < format.epsilon())
                throw std::invalid_argument("grid initialization needs w_init >= epsilon");
            if (n_unlocked < 1 || n_unlocked > format.n_bits())
                throw std::invalid_argument("grid initialization: unlocked bit count out of range");
            const auto cand = grid_candidates(format, n_unlocked, config.w_init);
            if (cand.empty()) throw std::invalid_argument("no grid value lies within the initial weight range");
            for (std::size_t w = 0; w < n_w; ++w) g.set_multiplier(w, cand[rng.below(cand.size())]);
            break;
        }
    }
    if (config.sparsity == Sparsity::prefer_nonzero)
        for (std::size_t w = 0; w < n_w; ++w)
            if (rng.coin()) g.set_multiplier(w, 0);
    return g;
}

Exploration explore_first_improving(Evaluator& ev, std::span<std::size_t> bits, Rng& rng, double tol) {
    Exploration ex;
    const std::size_t n = bits.size();
    // Incremental Fisher-Yates: position i is drawn only when it is needed.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(bits[i], bits[j]);
        ++ex.probes;
        const double d = ev.probe(bits[i], -tol);
        if (d < -tol) {
            ex.move = bits[i];
            ex.delta = d;
            return ex;
        }
    }
    return ex;
}

Exploration explore_first_improving_sparse(Evaluator& ev, std::span<const std::size_t> bits, Rng& rng, double tol,
                                           std::vector<std::size_t>* probed) {
    const BitGenome& g = ev.genome();
    std::vector<std::size_t> nonzero, zero;
    for (auto b : bits) (g.multiplier(g.weight_index_of_bit(b)) != 0 ? nonzero : zero).push_back(b);
    Exploration ex;
    for (auto* group : {&nonzero, &zero}) {
        Exploration part = explore_first_improving(ev, *group, rng, tol);
        if (probed) probed->insert(probed->end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(part.probes));
        ex.probes += part.probes;
        if (part.move) {
            ex.move = part.move;
            ex.delta = part.delta;
            return ex;
        }
    }
    return ex;
}

Exploration explore_best(Evaluator& ev, std::span<const std::size_t> bits, Rng& rng, double tol) {
    Exploration ex;
    std::size_t ties = 0;
    for (auto b : bits) {
        ++ex.probes;
        const double d = ev.probe(b);
        if (!(d < -tol)) continue;
        if (!ex.move || d < ex.delta) {
            ex.move = b;
            ex.delta = d;
            ties = 1;
        } else if (d == ex.delta) {
            ++ties;
            if (rng.below(ties) == 0) ex.move = b;
        }
    }
    return ex;
}

RunTrace run(Evaluator& ev, const SearchConfig& config) {
    const WeightFormat format = ev.genome().format();
    const ParameterLayout layout = ev.genome().layout();
    config.validate(format);

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

    Rng rng(config.seed);
    std::optional<Telescope> tel;
    if (config.telescope) tel.emplace(*config.telescope, layout.n_weights());
    const int n_bits = format.n_bits();
    auto n_unlocked = [&] { return tel ? tel->unlocked_bits() : n_bits; };
    std::vector<std::size_t> bits;
    if (tel) {
        bits = tel->unlocked_set();
    } else {
        bits.resize(layout.n_weights() * static_cast<std::size_t>(n_bits));
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = i;
    }

    ev.reset(initialize(layout, format, config, n_unlocked(), rng));

    RunTrace trace;
    double frac_sum = 0.0;
    std::uint64_t frac_count = 0;

    auto record_event = [&] {
        TraceEvent e;
        e.time = elapsed();
        e.accepted = trace.accepted;
        e.probes = trace.probes;
        e.n_unlocked = n_unlocked();
        e.train_loss = ev.objective();
        e.validation_loss = ev.validation_loss();
        e.mean_fraction = frac_count ? frac_sum / static_cast<double>(frac_count) : 0.0;
        e.restarts = trace.restarts;
        frac_sum = 0.0;
        frac_count = 0;
        trace.events.push_back(e);
        if (!trace.best_genome || e.validation_loss < trace.best_validation) {
            trace.best_genome = ev.genome();
            trace.best_validation = e.validation_loss;
        }
        return config.stop_when && config.stop_when(ev);
    };
    auto do_unlock = [&](bool by_threshold) {
        tel->unlock();
        bits = tel->unlocked_set();
        trace.unlocks.push_back({elapsed(), trace.accepted, tel->unlocked_bits(), by_threshold});
    };

    bool stopped = record_event();
    if (stopped) trace.reason = StopReason::stop_condition;
    std::uint64_t since_validation = 0;
    while (!stopped) {
        if ((config.budget.seconds > 0.0 && elapsed() >= config.budget.seconds) ||
            (config.budget.max_moves && trace.accepted >= config.budget.max_moves) ||
            (config.budget.max_probes && trace.probes >= config.budget.max_probes)) {
            trace.reason = StopReason::budget;
            break;
        }
        const double tol = config.improvement_tol * std::max(1.0, std::fabs(ev.objective()));
        Exploration ex;
        if (config.strategy == Strategy::best_move)
            ex = explore_best(ev, bits, rng, tol);
        else if (config.sparsity == Sparsity::prefer_nonzero)
            ex = explore_first_improving_sparse(ev, bits, rng, tol);
        else
            ex = explore_first_improving(ev, bits, rng, tol);
        trace.probes += ex.probes;

        if (ex.move) {
            ev.commit(*ex.move);
            ++trace.accepted;
            const double fraction = static_cast<double>(ex.probes) / static_cast<double>(bits.size());
            frac_sum += fraction;
            ++frac_count;
            if (config.record_steps)
                trace.steps.push_back({elapsed(), trace.accepted, ev.objective(), fraction, n_unlocked(), *ex.move, ex.probes});
            if (tel && tel->update_and_check(static_cast<double>(ex.probes - 1))) do_unlock(true);
            if (++since_validation >= config.validate_every) {
                since_validation = 0;
                if (record_event()) {
                    trace.reason = StopReason::stop_condition;
                    stopped = true;
                }
            }
            continue;
        }

        // Local minimum of the current neighborhood.
        if (tel && !tel->at_max()) {
            do_unlock(false);
            continue;
        }
        if (config.restart == RestartPolicy::repeated) {
            if (record_event()) {
                trace.reason = StopReason::stop_condition;
                break;
            }
            since_validation = 0;
            ++trace.restarts;
            if (tel) {
                tel->reset();
                bits = tel->unlocked_set();
            }
            ev.reset(initialize(layout, format, config, n_unlocked(), rng));
            continue;
        }
        trace.reason = StopReason::local_minimum;
        break;
    }
    if (trace.events.empty() || trace.events.back().accepted != trace.accepted || trace.events.back().restarts != trace.restarts)
        record_event();
    trace.seconds = elapsed();
    trace.final_train_loss = trace.events.back().train_loss;
    trace.final_validation_loss = trace.events.back().validation_loss;
    return trace;
}

}  // namespace tblm
