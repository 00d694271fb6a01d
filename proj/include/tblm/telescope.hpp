#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace tblm {

/// Expected minimum of a uniformly random k-subset of {0, ..., N-1}, i.e. the
/// expected number of failed probes before the first of k improving moves
/// hidden among N is found. Computed with the recurrence
///   E_{k,k} = 0,  E_{k,N} = alpha_{k,N} + ((N-k)/N) E_{k,N-1}
///   alpha_{k,k} = 0,  alpha_{k,N} = ((N-k)/N) (k/(N-1) + alpha_{k,N-1})
/// in extended precision. Equals (N-k)/(k+1).
double expected_min(std::size_t k, std::size_t n);

/// The same recurrence with (N+k)/N in place of (N-k)/N on the E_{k,N-1}
/// term. It disagrees with the subset-enumeration definition whenever
/// k < N - 1; kept so that the discrepancy stays under test.
double expected_min_printed_recurrence(std::size_t k, std::size_t n);

/// (N-k)/(k+1).
double expected_min_closed_form(std::size_t k, std::size_t n);

enum class TriggerMode { local_minimum, threshold };

std::string_view to_string(TriggerMode m) noexcept;
TriggerMode parse_trigger(std::string_view s);

struct TelescopeConfig {
    int n_start = 2;
    int n_max = 12;
    TriggerMode trigger = TriggerMode::local_minimum;
    double phi = 0.10;
    double eta = 0.95;

    void validate() const;
};

/// Multi-scale bit schedule: only the n' most significant Gray bits of every
/// weight may flip. In threshold mode an exponential moving average of the
/// failed-probe counts is compared against E_{floor(phi N), N}.
class Telescope {
public:
    Telescope(TelescopeConfig config, std::size_t n_weights);

    const TelescopeConfig& config() const noexcept { return cfg_; }
    int unlocked_bits() const noexcept { return n_unlocked_; }
    bool at_max() const noexcept { return n_unlocked_ >= cfg_.n_max; }
    /// Number of available moves N = n_weights * n'.
    std::size_t moves() const noexcept { return n_weights_ * static_cast<std::size_t>(n_unlocked_); }
    double moving_average() const noexcept { return mu_; }
    double threshold() const noexcept { return threshold_; }

    /// Feeds the failed-probe count of a successful step. Returns true when
    /// the moving average reaches the threshold and a bit can still be
    /// unlocked. Always false in local-minimum mode.
    bool update_and_check(double failed_probes);

    /// Unlocks the next significant bit of every weight, resets the average
    /// and recomputes the threshold.
    void unlock();

    /// Back to n_start with a fresh average (used on restarts).
    void reset();

    /// Bit indices of the unlocked positions, weight-major.
    std::vector<std::size_t> unlocked_set() const;

private:
    void recompute_threshold();

    TelescopeConfig cfg_;
    std::size_t n_weights_;
    int n_unlocked_;
    double mu_ = 0.0;
    double threshold_ = 0.0;
};

}  // namespace tblm
