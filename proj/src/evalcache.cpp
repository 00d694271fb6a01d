#include "tblm/evalcache.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace tblm {

ActivationCache::ActivationCache(const Topology& topo, LossKind loss, const Dataset& samples, const BitGenome& genome)
    : topo_(topo), loss_(loss), n_samples_(samples.size()), targets_(samples.targets) {
    if (topo_.recurrent()) throw std::invalid_argument("activation cache requires a feed-forward topology");
    if (n_samples_ == 0) throw std::invalid_argument("activation cache needs at least one sample");
    if (samples.n_inputs != topo_.n_inputs() || samples.n_outputs != topo_.n_outputs())
        throw std::invalid_argument("dataset shape " + std::to_string(samples.n_inputs) + "->" +
                                    std::to_string(samples.n_outputs) + " does not match network " + topo_.arch_string());
    const std::size_t L = topo_.n_layers();
    s_.resize(L + 1);
    o_.resize(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
        s_[l].assign(n_samples_ * topo_.layer_size(l), 0.0);
        o_[l].assign(n_samples_ * topo_.layer_size(l), 0.0);
    }
    o_[0] = samples.inputs;
    s_[0] = samples.inputs;
    coords_.reserve(topo_.n_weights());
    for (std::size_t w = 0; w < topo_.n_weights(); ++w) coords_.push_back(topo_.layout().coord_of(w));
    std::size_t widest = 0;
    for (auto n : topo_.layer_sizes()) widest = std::max(widest, n);
    delta_a_.assign(widest, 0.0);
    delta_b_.assign(widest, 0.0);
    rebuild(genome);
}

void ActivationCache::rebuild(const BitGenome& genome) {
    if (genome.layout() != topo_.layout()) throw std::invalid_argument("genome layout does not match topology");
    const auto& lay = topo_.layout();
    const auto w = genome.weights();
    for (std::size_t l = 1; l <= topo_.n_layers(); ++l) {
        const std::size_t n_prev = topo_.layer_size(l - 1), n_l = topo_.layer_size(l), stride = lay.row_stride(l);
        const Transfer f = topo_.transfer(l);
        for (std::size_t p = 0; p < n_samples_; ++p) {
            const double* prev = o_[l - 1].data() + p * n_prev;
            const double* row = w.data() + lay.layer_offset(l);
            for (std::size_t j = 0; j < n_l; ++j, row += stride) {
                double s = row[stride - 1];
                for (std::size_t i = 0; i < n_prev; ++i) s += row[i] * prev[i];
                s_[l][p * n_l + j] = s;
                o_[l][p * n_l + j] = apply(f, s);
            }
        }
    }
    recompute_term_sum();
}

void ActivationCache::recompute_term_sum() {
    CompensatedSum acc;
    const auto& out = o_.back();
    for (std::size_t i = 0; i < out.size(); ++i) acc.add(loss_term(loss_, out[i], targets_[i]));
    term_sum_ = acc.value();
}

template <class Self>
double ActivationCache::apply_change(Self& self, const BitGenome& genome, std::size_t weight_index, double new_weight,
                                     ProbeCounters* counters) {
    constexpr bool write = !std::is_const_v<Self>;
    const Topology& topo = self.topo_;
    const auto& lay = topo.layout();
    const auto w = genome.weights();
    const ParamCoord c = self.coords_[weight_index];
    const std::size_t L = topo.n_layers();
    const std::size_t l = c.layer, J = c.to;
    const std::size_t n_prev = topo.layer_size(l - 1), n_l = topo.layer_size(l);
    const bool bias = c.kind == ParamKind::bias;
    const double dw = new_weight - w[weight_index];
    const Transfer f = topo.transfer(l);
    auto& s_l = self.s_[l];
    auto& o_l = self.o_[l];
    const auto& o_prev = self.o_[l - 1];
    const double* tgt = self.targets_.data();

    std::uint64_t touched = 0;
    CompensatedSum acc;
    if (dw == 0.0) return 0.0;

    for (std::size_t p = 0; p < self.n_samples_; ++p) {
        const double ds = bias ? dw : dw * o_prev[p * n_prev + c.from];
        if (ds == 0.0) continue;
        const std::size_t idx = p * n_l + J;
        const double s_new = s_l[idx] + ds;
        const double o_new = apply(f, s_new);
        ++touched;
        const double o_old = o_l[idx];
        if constexpr (write) {
            s_l[idx] = s_new;
            o_l[idx] = o_new;
        }
        if (l == L) {
            acc.add(loss_term(self.loss_, o_new, tgt[idx]) - loss_term(self.loss_, o_old, tgt[idx]));
            continue;
        }
        const double d_o = o_new - o_old;
        if (d_o == 0.0) continue;

        // Layer l+1: a single source neuron changed.
        double* prev_delta = self.delta_a_.data();
        double* next_delta = self.delta_b_.data();
        {
            const std::size_t m = l + 1, n_m = topo.layer_size(m), stride = lay.row_stride(m);
            const Transfer fm = topo.transfer(m);
            const double* col = w.data() + lay.layer_offset(m) + J;
            auto& s_m = self.s_[m];
            auto& o_m = self.o_[m];
            double sample_delta = 0.0;
            for (std::size_t k = 0; k < n_m; ++k, col += stride) {
                const std::size_t ik = p * n_m + k;
                const double s2 = s_m[ik] + (*col) * d_o;
                const double o2 = apply(fm, s2);
                if (m == L) sample_delta += loss_term(self.loss_, o2, tgt[ik]) - loss_term(self.loss_, o_m[ik], tgt[ik]);
                prev_delta[k] = o2 - o_m[ik];
                if constexpr (write) {
                    s_m[ik] = s2;
                    o_m[ik] = o2;
                }
            }
            touched += n_m;
            if (m == L) {
                acc.add(sample_delta);
                continue;
            }
        }
        // Remaining layers: every source may have changed.
        for (std::size_t m = l + 2; m <= L; ++m) {
            const std::size_t n_src = topo.layer_size(m - 1), n_m = topo.layer_size(m), stride = lay.row_stride(m);
            const Transfer fm = topo.transfer(m);
            const double* row = w.data() + lay.layer_offset(m);
            auto& s_m = self.s_[m];
            auto& o_m = self.o_[m];
            double sample_delta = 0.0;
            for (std::size_t k = 0; k < n_m; ++k, row += stride) {
                const std::size_t ik = p * n_m + k;
                double ds2 = 0.0;
                for (std::size_t i = 0; i < n_src; ++i) ds2 += row[i] * prev_delta[i];
                const double s2 = s_m[ik] + ds2;
                const double o2 = apply(fm, s2);
                if (m == L) sample_delta += loss_term(self.loss_, o2, tgt[ik]) - loss_term(self.loss_, o_m[ik], tgt[ik]);
                next_delta[k] = o2 - o_m[ik];
                if constexpr (write) {
                    s_m[ik] = s2;
                    o_m[ik] = o2;
                }
            }
            touched += n_m;
            if (m == L) acc.add(sample_delta);
            std::swap(prev_delta, next_delta);
        }
    }
    if (counters) {
        counters->neuron_updates += touched;
        counters->sample_visits += self.n_samples_;
    }
    return acc.value();
}

double ActivationCache::probe_terms(const BitGenome& genome, std::size_t bit, ProbeCounters* counters) const {
    const double new_w = genome.weight_after_flip(bit);
    return apply_change(*this, genome, genome.weight_index_of_bit(bit), new_w, counters);
}

double ActivationCache::probe_move(const BitGenome& genome, std::size_t bit, ProbeCounters* counters) const {
    const double d = probe_terms(genome, bit, counters);
    return loss_from_sum(loss_, term_sum_ + d, n_samples_ * topo_.n_outputs()) - base_loss();
}

void ActivationCache::commit_move(BitGenome& genome, std::size_t bit) {
    const double new_w = genome.weight_after_flip(bit);
    apply_change(*this, genome, genome.weight_index_of_bit(bit), new_w, nullptr);
    genome.flip_bit(bit);
    recompute_term_sum();
}

double ActivationCache::max_deviation_from(const BitGenome& genome) const {
    ActivationCache fresh = *this;
    fresh.rebuild(genome);
    double dev = std::fabs(fresh.term_sum_ - term_sum_);
    for (std::size_t l = 1; l < s_.size(); ++l)
        for (std::size_t i = 0; i < s_[l].size(); ++i) {
            dev = std::max(dev, std::fabs(fresh.s_[l][i] - s_[l][i]));
            dev = std::max(dev, std::fabs(fresh.o_[l][i] - o_[l][i]));
        }
    return dev;
}

DatasetEvaluator::DatasetEvaluator(Topology topo, LossSpec loss, Dataset train, Dataset validation, BitGenome genome)
    : topo_(std::move(topo)),
      loss_(loss),
      train_(std::move(train)),
      validation_(std::move(validation)),
      genome_(std::move(genome)),
      cache_(topo_, loss_.kind, train_, genome_),
      reg_(regularization(genome_, loss_.reg_coeff)) {}

void DatasetEvaluator::reset(const BitGenome& genome) {
    genome_ = genome;
    cache_.rebuild(genome_);
    reg_ = regularization(genome_, loss_.reg_coeff);
}

double DatasetEvaluator::probe(std::size_t bit, double /*reject_at*/) {
    const double d_terms = cache_.probe_terms(genome_, bit, &counters_);
    const std::size_t count = cache_.n_samples() * topo_.n_outputs();
    double d_reg = 0.0;
    if (loss_.reg_coeff != 0.0) {
        const double w_max = genome_.format().w_max();
        const double w_old = genome_.weight(genome_.weight_index_of_bit(bit)) / w_max;
        const double w_new = genome_.weight_after_flip(bit) / w_max;
        d_reg = loss_.reg_coeff * (w_new * w_new - w_old * w_old) / static_cast<double>(genome_.n_weights());
    }
    const double base_new = loss_from_sum(loss_.kind, cache_.term_sum() + d_terms, count);
    return (base_new - cache_.base_loss()) + d_reg;
}

void DatasetEvaluator::commit(std::size_t bit) {
    cache_.commit_move(genome_, bit);
    reg_ = regularization(genome_, loss_.reg_coeff);
}

double DatasetEvaluator::validation_loss() {
    if (validation_.size() == 0) return objective();
    return evaluate_loss(topo_, genome_.weights(), loss_.kind, validation_);
}

std::vector<double> predict(const Topology& topo, std::span<const double> weights, const Dataset& data) {
    std::vector<double> out;
    out.reserve(data.size() * topo.n_outputs());
    Activations act;
    for (std::size_t p = 0; p < data.size(); ++p) {
        forward_into(topo, weights, data.input(p), {}, act);
        out.insert(out.end(), act.o.back().begin(), act.o.back().end());
    }
    return out;
}

double evaluate_loss(const Topology& topo, std::span<const double> weights, LossKind kind, const Dataset& data) {
    const auto pred = predict(topo, weights, data);
    return base_loss(kind, pred, data.targets);
}

}  // namespace tblm
