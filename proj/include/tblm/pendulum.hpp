#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "tblm/codec.hpp"
#include "tblm/evaluator.hpp"
#include "tblm/net.hpp"
#include "tblm/objective.hpp"

namespace tblm {

class Rng;

/// Cart-pole constants, integration grid and error-functional parameters.
struct SimConfig {
    double cart_mass = 1.0;      // M, kg
    double pole_mass = 1.0;      // m, kg
    double length = 1.0;         // l, m
    double gravity = 9.81;       // m/s^2
    double dt = 0.01;            // s
    double horizon = 100.0;      // T, s
    int hold_steps = 10;         // control held constant this many steps
    double t_min = 1.0;          // s excluded from the error
    double lambda = 0.01;        // m^-2, weight of x^2
    double theta0_range = 0.4;   // rad, initial angle drawn in [-r, r]
    double theta_limit = std::numbers::pi;  // |theta| beyond this is divergence
    double x_limit = 100.0;                 // |x| beyond this is divergence

    void validate() const;
    std::size_t total_steps() const;
    std::size_t first_error_step() const;
    /// Error charged per remaining step after a divergence.
    double divergence_penalty() const { return theta_limit * theta_limit + lambda * x_limit * x_limit; }
};

struct SimState {
    double x = 0.0, x_dot = 0.0;
    double theta = 0.0, theta_dot = 0.0;
    double t = 0.0;
};

/// One explicit Euler step of the cart-pole equations under force F.
SimState step(const SimState& s, double force, const SimConfig& cfg);

bool is_finite(const SimState& s) noexcept;

enum class FeedbackMode { complete, derivative_free };

std::string_view to_string(FeedbackMode m) noexcept;
FeedbackMode parse_feedback(std::string_view s);
/// Network inputs per mode: (x, theta, x_dot, theta_dot) or (x, theta).
std::size_t feedback_inputs(FeedbackMode m) noexcept;

struct TrajectoryPoint {
    double t, x, x_dot, theta, theta_dot, force;
};

struct SimResult {
    double err = 0.0;
    bool diverged = false;
    /// Set when the run stopped early because err was known to exceed the
    /// abandon bound; err is then a lower bound.
    bool abandoned = false;
    double max_abs_theta = 0.0;
    std::size_t steps = 0;
};

/// Closed-loop run from (x=0, theta0, zero velocities). The network is
/// queried every hold_steps steps; recurrent networks keep their hidden
/// state between queries, starting from zero. Err is the mean of
/// theta^2 + lambda x^2 over steps in [t_min, T). After a divergence every
/// remaining step up to T, including steps before t_min, is charged
/// divergence_penalty(); Err may then exceed the penalty.
SimResult simulate(const Topology& topo, std::span<const double> weights, FeedbackMode mode, double theta0,
                   const SimConfig& cfg, std::vector<TrajectoryPoint>* trajectory = nullptr,
                   double abandon_above = std::numeric_limits<double>::infinity());

/// Same closed loop with an arbitrary force law `double(const SimState&)`.
template <class Controller>
SimResult simulate_with(Controller&& controller, double theta0, const SimConfig& cfg,
                        std::vector<TrajectoryPoint>* trajectory = nullptr,
                        double abandon_above = std::numeric_limits<double>::infinity());

/// Mean Err of the genome over a batch of initial angles.
double fitness(const BitGenome& genome, const Topology& topo, FeedbackMode mode, const SimConfig& cfg,
               std::span<const double> theta0s);

std::vector<double> draw_initial_angles(Rng& rng, std::size_t count, double range);

/// Control objective: mean Err over a frozen batch of initial angles plus
/// regularization. Every probe re-runs the whole batch on a scratch copy
/// of the weights.
class ControlEvaluator final : public Evaluator {
public:
    ControlEvaluator(Topology topo, FeedbackMode mode, SimConfig cfg, LossSpec loss, std::vector<double> train_angles,
                     std::vector<double> validation_angles, BitGenome genome);

    const BitGenome& genome() const override { return genome_; }
    void reset(const BitGenome& genome) override;
    double objective() const override { return err_ + reg_; }
    double probe(std::size_t bit, double reject_at = std::numeric_limits<double>::infinity()) override;
    void commit(std::size_t bit) override;
    double validation_loss() override;

    double training_err() const noexcept { return err_; }
    const Topology& topology() const noexcept { return topo_; }
    FeedbackMode mode() const noexcept { return mode_; }
    const SimConfig& sim() const noexcept { return cfg_; }
    std::uint64_t simulations_run() const noexcept { return sims_; }

private:
    double batch_err(std::span<const double> weights, std::span<const double> angles, double abandon_mean);

    Topology topo_;
    FeedbackMode mode_;
    SimConfig cfg_;
    LossSpec loss_;
    std::vector<double> train_;
    std::vector<double> validation_;
    BitGenome genome_;
    std::vector<double> scratch_;
    double err_ = 0.0;
    double reg_ = 0.0;
    std::uint64_t sims_ = 0;
};

// --- implementation of the template ---

template <class Controller>
SimResult simulate_with(Controller&& controller, double theta0, const SimConfig& cfg,
                        std::vector<TrajectoryPoint>* trajectory, double abandon_above) {
    cfg.validate();
    const std::size_t total = cfg.total_steps(), first = cfg.first_error_step();
    const std::size_t window = total - first;
    SimState s;
    s.theta = theta0;
    SimResult r;
    const double abandon_sum = abandon_above * static_cast<double>(window);
    const auto hold = static_cast<std::size_t>(cfg.hold_steps);
    double force = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        if (i % hold == 0) {
            if (sum >= abandon_sum) {
                r.abandoned = true;
                r.steps = i;
                r.err = sum / static_cast<double>(window);
                return r;
            }
            force = controller(s);
        }
        if (trajectory) trajectory->push_back({s.t, s.x, s.x_dot, s.theta, s.theta_dot, force});
        r.max_abs_theta = std::max(r.max_abs_theta, std::abs(s.theta));
        if (!is_finite(s) || std::abs(s.theta) > cfg.theta_limit || std::abs(s.x) > cfg.x_limit) {
            r.diverged = true;
            // Steps before t_min are charged too, so an earlier fall always costs more.
            sum += static_cast<double>(total - i) * cfg.divergence_penalty();
            r.steps = i;
            r.err = sum / static_cast<double>(window);
            return r;
        }
        if (i >= first) sum += s.theta * s.theta + cfg.lambda * s.x * s.x;
        s = step(s, force, cfg);
    }
    r.steps = total;
    r.err = sum / static_cast<double>(window);
    return r;
}

}  // namespace tblm
