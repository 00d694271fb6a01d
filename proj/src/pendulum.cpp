#include "tblm/pendulum.hpp"

#include <stdexcept>
#include <string>

#include "tblm/rng.hpp"

namespace tblm {

void SimConfig::validate() const {
    if (!(cart_mass > 0 && pole_mass > 0 && length > 0 && dt > 0 && horizon > 0 && gravity >= 0))
        throw std::invalid_argument("pendulum masses, length, step and horizon must be positive");
    if (hold_steps < 1) throw std::invalid_argument("control hold must be at least one step");
    if (!(t_min >= 0 && t_min < horizon)) throw std::invalid_argument("t_min must lie in [0, T)");
    if (!(lambda >= 0)) throw std::invalid_argument("lambda must be >= 0");
}

std::size_t SimConfig::total_steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

std::size_t SimConfig::first_error_step() const { return static_cast<std::size_t>(std::llround(t_min / dt)); }

SimState step(const SimState& s, double force, const SimConfig& cfg) {
    const double sin_t = std::sin(s.theta), cos_t = std::cos(s.theta);
    const double m = cfg.pole_mass, l = cfg.length, g = cfg.gravity;
    const double x_acc = (force - m * sin_t * (l * s.theta_dot * s.theta_dot - g * cos_t)) / (cfg.cart_mass + m * sin_t * sin_t);
    const double theta_acc = (x_acc * cos_t + g * sin_t) / l;
    SimState n;
    n.x = s.x + cfg.dt * s.x_dot;
    n.x_dot = s.x_dot + cfg.dt * x_acc;
    n.theta = s.theta + cfg.dt * s.theta_dot;
    n.theta_dot = s.theta_dot + cfg.dt * theta_acc;
    n.t = s.t + cfg.dt;
    return n;
}

bool is_finite(const SimState& s) noexcept {
    return std::isfinite(s.x) && std::isfinite(s.x_dot) && std::isfinite(s.theta) && std::isfinite(s.theta_dot);
}

std::string_view to_string(FeedbackMode m) noexcept { return m == FeedbackMode::complete ? "complete" : "derivative-free"; }

FeedbackMode parse_feedback(std::string_view s) {
    if (s == "complete") return FeedbackMode::complete;
    if (s == "derivative-free" || s == "positional") return FeedbackMode::derivative_free;
    throw std::invalid_argument("unknown feedback mode '" + std::string(s) + "' (expected complete or derivative-free)");
}

std::size_t feedback_inputs(FeedbackMode m) noexcept { return m == FeedbackMode::complete ? 4 : 2; }

SimResult simulate(const Topology& topo, std::span<const double> weights, FeedbackMode mode, double theta0,
                   const SimConfig& cfg, std::vector<TrajectoryPoint>* trajectory, double abandon_above) {
    if (topo.n_inputs() != feedback_inputs(mode))
        throw std::invalid_argument("controller has " + std::to_string(topo.n_inputs()) + " inputs, " +
                                    std::string(to_string(mode)) + " feedback provides " +
                                    std::to_string(feedback_inputs(mode)));
    if (topo.n_outputs() != 1) throw std::invalid_argument("controller must have exactly one output");
    Activations act;
    std::vector<double> hidden(topo.recurrent() ? topo.layer_size(1) : 0, 0.0);
    double input[4];
    auto controller = [&](const SimState& s) {
        input[0] = s.x;
        input[1] = s.theta;
        input[2] = s.x_dot;
        input[3] = s.theta_dot;
        forward_into(topo, weights, std::span<const double>(input, feedback_inputs(mode)), hidden, act);
        if (topo.recurrent()) hidden.assign(act.o[1].begin(), act.o[1].end());
        return act.o.back()[0];
    };
    return simulate_with(controller, theta0, cfg, trajectory, abandon_above);
}

double fitness(const BitGenome& genome, const Topology& topo, FeedbackMode mode, const SimConfig& cfg,
               std::span<const double> theta0s) {
    if (theta0s.empty()) throw std::invalid_argument("fitness needs at least one initial condition");
    if (genome.layout() != topo.layout()) throw std::invalid_argument("genome layout does not match topology");
    double sum = 0.0;
    for (double a : theta0s) sum += simulate(topo, genome.weights(), mode, a, cfg).err;
    return sum / static_cast<double>(theta0s.size());
}

std::vector<double> draw_initial_angles(Rng& rng, std::size_t count, double range) {
    std::vector<double> out(count);
    for (auto& a : out) a = rng.uniform(-range, range);
    return out;
}

ControlEvaluator::ControlEvaluator(Topology topo, FeedbackMode mode, SimConfig cfg, LossSpec loss,
                                   std::vector<double> train_angles, std::vector<double> validation_angles,
                                   BitGenome genome)
    : topo_(std::move(topo)),
      mode_(mode),
      cfg_(cfg),
      loss_(loss),
      train_(std::move(train_angles)),
      validation_(std::move(validation_angles)),
      genome_(std::move(genome)) {
    cfg_.validate();
    if (train_.empty()) throw std::invalid_argument("control training batch is empty");
    if (topo_.n_inputs() != feedback_inputs(mode_) || topo_.n_outputs() != 1)
        throw std::invalid_argument("controller topology " + topo_.arch_string() + " does not fit " +
                                    std::string(to_string(mode_)) + " feedback");
    reset(genome_);
}

double ControlEvaluator::batch_err(std::span<const double> weights, std::span<const double> angles, double abandon_mean) {
    const double n = static_cast<double>(angles.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
        // Remaining budget for this simulation given what is already spent.
        const double bound = abandon_mean * n - sum;
        const SimResult r = simulate(topo_, weights, mode_, angles[i], cfg_, nullptr, bound);
        ++sims_;
        sum += r.err;
        if (r.abandoned || sum >= abandon_mean * n) return sum / n;
    }
    return sum / n;
}

void ControlEvaluator::reset(const BitGenome& genome) {
    if (genome.layout() != topo_.layout()) throw std::invalid_argument("genome layout does not match topology");
    genome_ = genome;
    scratch_.assign(genome_.weights().begin(), genome_.weights().end());
    err_ = batch_err(scratch_, train_, std::numeric_limits<double>::infinity());
    reg_ = regularization(genome_, loss_.reg_coeff);
}

double ControlEvaluator::probe(std::size_t bit, double reject_at) {
    const std::size_t w = genome_.weight_index_of_bit(bit);
    const double new_w = genome_.weight_after_flip(bit);
    double reg_new = reg_;
    if (loss_.reg_coeff != 0.0) {
        const double w_max = genome_.format().w_max();
        const double a = genome_.weight(w) / w_max, b = new_w / w_max;
        reg_new += loss_.reg_coeff * (b * b - a * a) / static_cast<double>(genome_.n_weights());
    }
    const double abandon = err_ + reg_ + reject_at - reg_new;
    scratch_[w] = new_w;
    const double err = batch_err(scratch_, train_, abandon);
    scratch_[w] = genome_.weight(w);
    return (err + reg_new) - (err_ + reg_);
}

void ControlEvaluator::commit(std::size_t bit) {
    genome_.flip_bit(bit);
    const std::size_t w = genome_.weight_index_of_bit(bit);
    scratch_[w] = genome_.weight(w);
    err_ = batch_err(scratch_, train_, std::numeric_limits<double>::infinity());
    reg_ = regularization(genome_, loss_.reg_coeff);
}

double ControlEvaluator::validation_loss() {
    if (validation_.empty()) return objective();
    return batch_err(scratch_, validation_, std::numeric_limits<double>::infinity());
}

}  // namespace tblm
