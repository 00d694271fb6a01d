#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>

#include "tblm/codec.hpp"

namespace tblm {

enum class LossKind { rmse, cross_entropy };

std::string_view to_string(LossKind k) noexcept;
/// "rmse" or "ce".
LossKind parse_loss(std::string_view name);

struct LossSpec {
    LossKind kind = LossKind::rmse;
    double reg_coeff = 0.0;
};

inline constexpr double kProbClamp = 1e-12;

/// Per-element loss term: squared error for RMSE, binary cross-entropy for CE.
inline double loss_term(LossKind kind, double p, double t) noexcept {
    if (kind == LossKind::rmse) {
        const double d = p - t;
        return d * d;
    }
    const double q = p < kProbClamp ? kProbClamp : (p > 1.0 - kProbClamp ? 1.0 - kProbClamp : p);
    return -(t * std::log(q) + (1.0 - t) * std::log(1.0 - q));
}

/// Base loss from the sum of loss terms over `count` elements.
inline double loss_from_sum(LossKind kind, double term_sum, std::size_t count) noexcept {
    const double mean = term_sum / static_cast<double>(count);
    return kind == LossKind::rmse ? std::sqrt(mean > 0.0 ? mean : 0.0) : mean;
}

/// Predictions and targets are row-major (samples x outputs) of equal size.
double rmse(std::span<const double> predictions, std::span<const double> targets);
double cross_entropy(std::span<const double> predictions, std::span<const double> targets);
double base_loss(LossKind kind, std::span<const double> predictions, std::span<const double> targets);

/// reg_coeff * mean over weights of (w / w_max)^2.
double regularization(const BitGenome& genome, double reg_coeff);
double total_loss(double base, const BitGenome& genome, const LossSpec& spec);

/// Fraction of rows whose argmax output matches the target argmax; a
/// single-output network is thresholded at 0.5.
double accuracy(std::span<const double> predictions, std::span<const double> targets, std::size_t n_outputs);

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace tblm
