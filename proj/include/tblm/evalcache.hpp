#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tblm/codec.hpp"
#include "tblm/data.hpp"
#include "tblm/evaluator.hpp"
#include "tblm/net.hpp"
#include "tblm/objective.hpp"

namespace tblm {

/// Work done by incremental probes: transfer-function evaluations and the
/// number of sample visits.
struct ProbeCounters {
    std::uint64_t neuron_updates = 0;
    std::uint64_t sample_visits = 0;
};

/// Stored pre-activations and outputs of every neuron for every sample,
/// with incremental evaluation of single-weight changes.
///
/// A change of weight w^l_{IJ} first recomputes neuron J of layer l; if l is
/// not the output layer the output change is pushed into layer l+1 and
/// onward. Samples whose affected pre-activation does not change are skipped.
class ActivationCache {
public:
    ActivationCache(const Topology& topo, LossKind loss, const Dataset& samples, const BitGenome& genome);

    std::size_t n_samples() const noexcept { return n_samples_; }
    const Topology& topology() const noexcept { return topo_; }
    LossKind loss_kind() const noexcept { return loss_; }

    /// Full forward pass for every sample.
    void rebuild(const BitGenome& genome);

    /// Sum of per-element loss terms and the resulting base loss.
    double term_sum() const noexcept { return term_sum_; }
    double base_loss() const noexcept { return loss_from_sum(loss_, term_sum_, n_samples_ * topo_.n_outputs()); }

    /// Change in the loss-term sum if the weight owning `bit` took its flipped
    /// value. Cache and genome are untouched.
    double probe_terms(const BitGenome& genome, std::size_t bit, ProbeCounters* counters = nullptr) const;
    /// Base-loss change for the flip of `bit`.
    double probe_move(const BitGenome& genome, std::size_t bit, ProbeCounters* counters = nullptr) const;
    /// Flips `bit` in the genome and updates the cache in place.
    void commit_move(BitGenome& genome, std::size_t bit);

    std::span<const double> pre_activations(std::size_t layer) const { return s_.at(layer); }
    std::span<const double> outputs(std::size_t layer) const { return o_.at(layer); }
    std::span<const double> network_outputs() const { return o_.back(); }

    /// Largest absolute difference between this cache and a fresh rebuild.
    double max_deviation_from(const BitGenome& genome) const;

private:
    // Self is `ActivationCache` to write the new activations back, or
    // `const ActivationCache` to only measure the loss change.
    template <class Self>
    static double apply_change(Self& self, const BitGenome& genome, std::size_t weight_index, double new_weight,
                               ProbeCounters* counters);
    void recompute_term_sum();

    Topology topo_;
    LossKind loss_;
    std::size_t n_samples_;
    std::vector<double> targets_;
    std::vector<ParamCoord> coords_;
    std::vector<std::vector<double>> s_;  // per layer, samples x n_l
    std::vector<std::vector<double>> o_;
    double term_sum_ = 0.0;
    mutable std::vector<double> delta_a_, delta_b_;
};

/// Dataset objective backed by an ActivationCache: probes and commits are
/// incremental; validation runs a full forward pass.
class DatasetEvaluator final : public Evaluator {
public:
    DatasetEvaluator(Topology topo, LossSpec loss, Dataset train, Dataset validation, BitGenome genome);

    const BitGenome& genome() const override { return genome_; }
    void reset(const BitGenome& genome) override;
    double objective() const override { return cache_.base_loss() + reg_; }
    double probe(std::size_t bit, double reject_at = std::numeric_limits<double>::infinity()) override;
    void commit(std::size_t bit) override;
    double validation_loss() override;

    double training_base_loss() const { return cache_.base_loss(); }
    const ActivationCache& cache() const noexcept { return cache_; }
    const Dataset& train() const noexcept { return train_; }
    const Dataset& validation() const noexcept { return validation_; }
    const Topology& topology() const noexcept { return topo_; }
    const LossSpec& loss() const noexcept { return loss_; }
    ProbeCounters& counters() noexcept { return counters_; }

private:
    Topology topo_;
    LossSpec loss_;
    Dataset train_;
    Dataset validation_;
    BitGenome genome_;
    ActivationCache cache_;
    double reg_ = 0.0;
    ProbeCounters counters_;
};

/// Base loss of `genome` on `data` by plain forward passes.
double evaluate_loss(const Topology& topo, std::span<const double> weights, LossKind kind, const Dataset& data);
/// Network outputs for every row of `data`, row-major.
std::vector<double> predict(const Topology& topo, std::span<const double> weights, const Dataset& data);

}  // namespace tblm
