#include "tblm/telescope.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace tblm {

namespace {

void check_kn(std::size_t k, std::size_t n) {
    if (k < 1 || k > n)
        throw std::invalid_argument("expected_min requires 1 <= k <= N (k=" + std::to_string(k) +
                                    ", N=" + std::to_string(n) + ")");
}

template <bool Printed>
double run_recurrence(std::size_t k, std::size_t n) {
    check_kn(k, n);
    using real = long double;
    const real kk = static_cast<real>(k);
    real alpha = 0.0L, e = 0.0L;
    for (std::size_t m = k + 1; m <= n; ++m) {
        const real nn = static_cast<real>(m);
        alpha = (nn - kk) / nn * (kk / (nn - 1.0L) + alpha);
        const real factor = Printed ? (nn + kk) / nn : (nn - kk) / nn;
        e = alpha + factor * e;
    }
    return static_cast<double>(e);
}

// Thresholds depend only on (k, N); shared by all runs.
double memo_expected_min(std::size_t k, std::size_t n) {
    static std::mutex mu;
    static std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::lock_guard lock(mu);
    const auto key = std::make_pair(k, n);
    if (auto it = table.find(key); it != table.end()) return it->second;
    const double v = expected_min(k, n);
    table.emplace(key, v);
    return v;
}

}  // namespace

double expected_min(std::size_t k, std::size_t n) { return run_recurrence<false>(k, n); }

double expected_min_printed_recurrence(std::size_t k, std::size_t n) { return run_recurrence<true>(k, n); }

double expected_min_closed_form(std::size_t k, std::size_t n) {
    check_kn(k, n);
    return static_cast<double>(n - k) / static_cast<double>(k + 1);
}

std::string_view to_string(TriggerMode m) noexcept { return m == TriggerMode::threshold ? "threshold" : "local-min"; }

TriggerMode parse_trigger(std::string_view s) {
    if (s == "local-min" || s == "local-minimum") return TriggerMode::local_minimum;
    if (s == "threshold") return TriggerMode::threshold;
    throw std::invalid_argument("unknown trigger '" + std::string(s) + "' (expected local-min or threshold)");
}

void TelescopeConfig::validate() const {
    if (n_start < 1 || n_start > n_max)
        throw std::invalid_argument("telescope start bits must satisfy 1 <= n_start <= n_max");
    if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("phi must be in [0, 1]");
    if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must be in [0, 1)");
}

Telescope::Telescope(TelescopeConfig config, std::size_t n_weights)
    : cfg_(config), n_weights_(n_weights), n_unlocked_(config.n_start) {
    cfg_.validate();
    if (n_weights_ == 0) throw std::invalid_argument("telescope needs at least one weight");
    recompute_threshold();
}

void Telescope::recompute_threshold() {
    const std::size_t n = moves();
    auto k = static_cast<std::size_t>(std::floor(cfg_.phi * static_cast<double>(n)));
    if (k < 1) k = 1;
    if (k > n) k = n;
    threshold_ = memo_expected_min(k, n);
}

bool Telescope::update_and_check(double failed_probes) {
    mu_ = cfg_.eta * mu_ + (1.0 - cfg_.eta) * failed_probes;
    if (cfg_.trigger != TriggerMode::threshold) return false;
    return !at_max() && mu_ >= threshold_;
}

void Telescope::unlock() {
    if (at_max()) throw std::logic_error("all bits are already unlocked");
    ++n_unlocked_;
    mu_ = 0.0;
    recompute_threshold();
}

void Telescope::reset() {
    n_unlocked_ = cfg_.n_start;
    mu_ = 0.0;
    recompute_threshold();
}

std::vector<std::size_t> Telescope::unlocked_set() const {
    std::vector<std::size_t> bits;
    bits.reserve(moves());
    const auto n = static_cast<std::size_t>(cfg_.n_max);
    for (std::size_t w = 0; w < n_weights_; ++w)
        for (int pos = 0; pos < n_unlocked_; ++pos) bits.push_back(w * n + static_cast<std::size_t>(pos));
    return bits;
}

}  // namespace tblm
