#include "tblm/objective.hpp"

#include <stdexcept>
#include <string>

namespace tblm {

std::string_view to_string(LossKind k) noexcept { return k == LossKind::rmse ? "rmse" : "ce"; }

LossKind parse_loss(std::string_view name) {
    if (name == "rmse") return LossKind::rmse;
    if (name == "ce" || name == "cross-entropy") return LossKind::cross_entropy;
    throw std::invalid_argument("unknown loss '" + std::string(name) + "' (expected rmse or ce)");
}

namespace {

double sum_terms(LossKind kind, std::span<const double> p, std::span<const double> t) {
    if (p.size() != t.size()) throw std::invalid_argument("predictions and targets differ in shape");
    if (p.empty()) throw std::invalid_argument("loss over an empty sample set");
    CompensatedSum acc;
    for (std::size_t i = 0; i < p.size(); ++i) acc.add(loss_term(kind, p[i], t[i]));
    return acc.value();
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> targets) {
    return loss_from_sum(LossKind::rmse, sum_terms(LossKind::rmse, predictions, targets), predictions.size());
}

double cross_entropy(std::span<const double> predictions, std::span<const double> targets) {
    return loss_from_sum(LossKind::cross_entropy, sum_terms(LossKind::cross_entropy, predictions, targets),
                         predictions.size());
}

double base_loss(LossKind kind, std::span<const double> predictions, std::span<const double> targets) {
    return kind == LossKind::rmse ? rmse(predictions, targets) : cross_entropy(predictions, targets);
}

double regularization(const BitGenome& genome, double reg_coeff) {
    if (reg_coeff == 0.0 || genome.n_weights() == 0) return 0.0;
    const double w_max = genome.format().w_max();
    CompensatedSum acc;
    for (double w : genome.weights()) acc.add((w / w_max) * (w / w_max));
    return reg_coeff * acc.value() / static_cast<double>(genome.n_weights());
}

double total_loss(double base, const BitGenome& genome, const LossSpec& spec) {
    return base + regularization(genome, spec.reg_coeff);
}

double accuracy(std::span<const double> predictions, std::span<const double> targets, std::size_t n_outputs) {
    if (n_outputs == 0 || predictions.size() != targets.size() || predictions.size() % n_outputs != 0)
        throw std::invalid_argument("accuracy: shape mismatch");
    const std::size_t rows = predictions.size() / n_outputs;
    if (rows == 0) throw std::invalid_argument("accuracy over an empty sample set");
    std::size_t correct = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = predictions.data() + r * n_outputs;
        const double* t = targets.data() + r * n_outputs;
        if (n_outputs == 1) {
            correct += ((p[0] >= 0.5) == (t[0] >= 0.5)) ? 1 : 0;
            continue;
        }
        std::size_t bp = 0, bt = 0;
        for (std::size_t k = 1; k < n_outputs; ++k) {
            if (p[k] > p[bp]) bp = k;
            if (t[k] > t[bt]) bt = k;
        }
        correct += bp == bt ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(rows);
}

}  // namespace tblm
