#include "tblm/net.hpp"

#include <charconv>
#include <stdexcept>

namespace tblm {

std::string_view to_string(Transfer f) noexcept {
    switch (f) {
        case Transfer::symmetric_sigmoid: return "tanh";
        case Transfer::logistic: return "logistic";
        case Transfer::linear: return "linear";
    }
    return "?";
}

Transfer parse_transfer(std::string_view name) {
    if (name == "tanh" || name == "symmetric-sigmoid") return Transfer::symmetric_sigmoid;
    if (name == "logistic" || name == "sigmoid") return Transfer::logistic;
    if (name == "linear") return Transfer::linear;
    throw std::invalid_argument("unknown transfer function '" + std::string(name) + "'");
}

Topology::Topology(std::vector<std::size_t> layer_sizes, std::vector<Transfer> transfer, bool recurrent)
    : sizes_(std::move(layer_sizes)), transfer_(std::move(transfer)), recurrent_(recurrent) {
    if (sizes_.size() < 2) throw std::invalid_argument("topology needs at least input and output layers");
    if (transfer_.size() != sizes_.size() - 1)
        throw std::invalid_argument("one transfer function per non-input layer is required");
    layout_ = ParameterLayout(sizes_, recurrent_);
}

Topology Topology::parse(std::string_view arch, Transfer hidden, Transfer output, bool recurrent) {
    std::vector<std::size_t> sizes;
    std::size_t pos = 0;
    while (pos <= arch.size()) {
        const std::size_t dash = arch.find('-', pos);
        const std::string_view tok = arch.substr(pos, dash == std::string_view::npos ? arch.size() - pos : dash - pos);
        std::size_t value = 0;
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (tok.empty() || ec != std::errc{} || end != tok.data() + tok.size() || value == 0)
            throw std::invalid_argument("bad architecture string '" + std::string(arch) + "'");
        sizes.push_back(value);
        if (dash == std::string_view::npos) break;
        pos = dash + 1;
    }
    if (sizes.size() < 2) throw std::invalid_argument("architecture needs at least two layers: '" + std::string(arch) + "'");
    std::vector<Transfer> transfer(sizes.size() - 1, hidden);
    transfer.back() = output;
    return Topology(std::move(sizes), std::move(transfer), recurrent);
}

std::string Topology::arch_string() const {
    std::string out;
    for (std::size_t l = 0; l < sizes_.size(); ++l) {
        if (l) out += '-';
        out += std::to_string(sizes_[l]);
    }
    return out;
}

void forward_into(const Topology& topo, std::span<const double> weights, std::span<const double> input,
                  std::span<const double> hidden_state, Activations& act) {
    const auto& lay = topo.layout();
    if (input.size() != topo.n_inputs())
        throw std::invalid_argument("input has " + std::to_string(input.size()) + " values, network expects " +
                                    std::to_string(topo.n_inputs()));
    if (weights.size() != lay.n_weights()) throw std::invalid_argument("weight vector does not match topology");
    const std::size_t L = topo.n_layers();
    if (act.o.size() != L + 1) {
        act.s.assign(L + 1, {});
        act.o.assign(L + 1, {});
        for (std::size_t l = 0; l <= L; ++l) {
            act.s[l].assign(topo.layer_size(l), 0.0);
            act.o[l].assign(topo.layer_size(l), 0.0);
        }
    }
    std::copy(input.begin(), input.end(), act.o[0].begin());
    std::copy(input.begin(), input.end(), act.s[0].begin());
    for (std::size_t l = 1; l <= L; ++l) {
        const std::size_t n_prev = topo.layer_size(l - 1);
        const std::size_t stride = lay.row_stride(l);
        const double* row = weights.data() + lay.layer_offset(l);
        const Transfer f = topo.transfer(l);
        const auto& prev = act.o[l - 1];
        for (std::size_t j = 0; j < topo.layer_size(l); ++j, row += stride) {
            double s = row[stride - 1];
            for (std::size_t i = 0; i < n_prev; ++i) s += row[i] * prev[i];
            if (l == 1 && topo.recurrent())
                for (std::size_t k = 0; k < hidden_state.size(); ++k) s += row[n_prev + k] * hidden_state[k];
            act.s[l][j] = s;
            act.o[l][j] = apply(f, s);
        }
    }
}

Activations forward(const Topology& topo, std::span<const double> weights, std::span<const double> input) {
    Activations act;
    std::vector<double> zero_state(topo.recurrent() ? topo.layer_size(1) : 0, 0.0);
    forward_into(topo, weights, input, zero_state, act);
    return act;
}

Activations forward(const Topology& topo, const BitGenome& genome, std::span<const double> input) {
    if (genome.layout() != topo.layout()) throw std::invalid_argument("genome layout does not match topology");
    return forward(topo, genome.weights(), input);
}

RecurrentStep forward_recurrent(const Topology& topo, const BitGenome& genome, std::span<const double> input,
                                std::span<const double> hidden_state) {
    if (!topo.recurrent()) throw std::invalid_argument("forward_recurrent called on a non-recurrent topology");
    if (genome.layout() != topo.layout()) throw std::invalid_argument("genome layout does not match topology");
    if (hidden_state.size() != topo.layer_size(1))
        throw std::invalid_argument("hidden state has wrong length");
    Activations act;
    forward_into(topo, genome.weights(), input, hidden_state, act);
    return {act.o.back(), act.o[1]};
}

}  // namespace tblm
