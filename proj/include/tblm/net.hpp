#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tblm/codec.hpp"

namespace tblm {

enum class Transfer { symmetric_sigmoid, logistic, linear };

inline double apply(Transfer f, double x) noexcept {
    switch (f) {
        case Transfer::symmetric_sigmoid: return std::tanh(x);
        case Transfer::logistic: return 1.0 / (1.0 + std::exp(-x));
        case Transfer::linear: return x;
    }
    return x;
}

std::string_view to_string(Transfer f) noexcept;
/// Accepts "tanh"/"symmetric-sigmoid", "logistic"/"sigmoid", "linear".
Transfer parse_transfer(std::string_view name);

/// Layer sizes n_0..n_L, one transfer function per non-input layer, and an
/// optional hidden-to-hidden recurrence on a single hidden layer.
class Topology {
public:
    Topology(std::vector<std::size_t> layer_sizes, std::vector<Transfer> transfer, bool recurrent = false);

    /// Parses a dash string such as "2-20-20-1". Hidden layers get `hidden`,
    /// the output layer gets `output`.
    static Topology parse(std::string_view arch, Transfer hidden = Transfer::symmetric_sigmoid,
                          Transfer output = Transfer::logistic, bool recurrent = false);

    std::size_t n_layers() const noexcept { return sizes_.size() - 1; }
    std::size_t n_inputs() const noexcept { return sizes_.front(); }
    std::size_t n_outputs() const noexcept { return sizes_.back(); }
    std::size_t layer_size(std::size_t l) const { return sizes_.at(l); }
    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    /// Transfer function of layer l, 1 <= l <= n_layers().
    Transfer transfer(std::size_t l) const { return transfer_.at(l - 1); }
    const std::vector<Transfer>& transfers() const noexcept { return transfer_; }
    bool recurrent() const noexcept { return recurrent_; }

    const ParameterLayout& layout() const noexcept { return layout_; }
    std::size_t n_weights() const noexcept { return layout_.n_weights(); }

    std::string arch_string() const;

    bool operator==(const Topology&) const = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<Transfer> transfer_;
    bool recurrent_;
    ParameterLayout layout_;
};

/// Pre-activations s[l][j] and outputs o[l][j] of every neuron; o[0] is the input.
struct Activations {
    std::vector<std::vector<double>> s;
    std::vector<std::vector<double>> o;

    std::span<const double> output() const { return o.back(); }
};

/// Full feed-forward pass over an explicit weight vector in layout order.
/// For a recurrent topology the hidden state is taken as zero.
Activations forward(const Topology& topo, std::span<const double> weights, std::span<const double> input);
Activations forward(const Topology& topo, const BitGenome& genome, std::span<const double> input);

/// Output-only variant writing into caller-owned scratch; no allocation once
/// `scratch` has been sized by a previous call.
void forward_into(const Topology& topo, std::span<const double> weights, std::span<const double> input,
                  std::span<const double> hidden_state, Activations& scratch);

struct RecurrentStep {
    std::vector<double> output;
    std::vector<double> hidden;
};

/// One step of the recurrent network: the hidden pre-activation adds the
/// recurrent contribution of the previous hidden outputs.
RecurrentStep forward_recurrent(const Topology& topo, const BitGenome& genome, std::span<const double> input,
                                std::span<const double> hidden_state);

}  // namespace tblm
