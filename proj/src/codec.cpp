#include "tblm/codec.hpp"

#include <cmath>
#include <string>

namespace tblm {

WeightFormat::WeightFormat(int n_bits, double w_max) : n_bits_(n_bits), w_max_(w_max), epsilon_(0.0) {
    if (n_bits < kMinBits || n_bits > kMaxBits)
        throw std::invalid_argument("bits per weight must be in [2, 24], got " + std::to_string(n_bits));
    if (!(w_max > 0.0) || !std::isfinite(w_max))
        throw std::invalid_argument("w_max must be positive and finite");
    epsilon_ = w_max / static_cast<double>((std::int64_t{1} << (n_bits - 1)) - 1);
}

std::int32_t WeightFormat::nearest_multiplier(double w) const noexcept {
    const double h = std::nearbyint(w / epsilon_);
    if (h < min_multiplier()) return min_multiplier();
    if (h > max_multiplier()) return max_multiplier();
    return static_cast<std::int32_t>(h);
}

std::uint32_t gray_encode(std::int32_t h, int n) {
    if (n < 1 || n > 31) throw std::invalid_argument("gray_encode: bit count out of range");
    const std::int64_t half = std::int64_t{1} << (n - 1);
    if (h < -half || h >= half)
        throw std::out_of_range("gray_encode: multiplier " + std::to_string(h) + " not representable in " +
                                std::to_string(n) + " bits");
    const auto u = static_cast<std::uint32_t>(h + half);
    return u ^ (u >> 1);
}

std::int32_t gray_decode(std::uint32_t pattern, int n) {
    if (n < 1 || n > 31) throw std::invalid_argument("gray_decode: bit count out of range");
    std::uint32_t u = pattern & ((std::uint32_t{1} << n) - 1);
    for (std::uint32_t shift = 1; shift < 32; shift <<= 1) u ^= u >> shift;
    return static_cast<std::int32_t>(static_cast<std::int64_t>(u) - (std::int64_t{1} << (n - 1)));
}

ParameterLayout::ParameterLayout(std::vector<std::size_t> layer_sizes, bool recurrent)
    : sizes_(std::move(layer_sizes)), recurrent_(recurrent) {
    if (sizes_.size() < 2) throw std::invalid_argument("layout needs at least an input and an output layer");
    for (auto s : sizes_)
        if (s == 0) throw std::invalid_argument("layer sizes must be >= 1");
    if (recurrent_ && sizes_.size() != 3)
        throw std::invalid_argument("recurrent layout requires exactly one hidden layer");
    offsets_.assign(sizes_.size(), 0);
    strides_.assign(sizes_.size(), 0);
    std::size_t offset = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        offsets_[l] = offset;
        strides_[l] = sizes_[l - 1] + ((recurrent_ && l == 1) ? sizes_[1] : 0) + 1;
        offset += strides_[l] * sizes_[l];
    }
    total_ = offset;
}

std::size_t ParameterLayout::index_of(const ParamCoord& c) const {
    if (c.layer < 1 || c.layer > n_layers()) throw std::out_of_range("parameter layer out of range");
    if (c.to >= sizes_[c.layer]) throw std::out_of_range("destination neuron out of range");
    const std::size_t base = offsets_[c.layer] + c.to * strides_[c.layer];
    switch (c.kind) {
        case ParamKind::weight:
            if (c.from >= sizes_[c.layer - 1]) throw std::out_of_range("source neuron out of range");
            return base + c.from;
        case ParamKind::recurrent:
            if (!recurrent_ || c.layer != 1) throw std::out_of_range("no recurrent weights at this layer");
            if (c.from >= sizes_[1]) throw std::out_of_range("recurrent source out of range");
            return base + sizes_[0] + c.from;
        case ParamKind::bias:
            return base + strides_[c.layer] - 1;
    }
    throw std::out_of_range("unknown parameter kind");
}

ParamCoord ParameterLayout::coord_of(std::size_t index) const {
    if (index >= total_) throw std::out_of_range("weight index out of range");
    std::size_t l = n_layers();
    while (offsets_[l] > index) --l;
    const std::size_t rel = index - offsets_[l];
    ParamCoord c;
    c.layer = l;
    c.to = rel / strides_[l];
    const std::size_t pos = rel % strides_[l];
    if (pos + 1 == strides_[l]) {
        c.kind = ParamKind::bias;
    } else if (pos < sizes_[l - 1]) {
        c.kind = ParamKind::weight;
        c.from = pos;
    } else {
        c.kind = ParamKind::recurrent;
        c.from = pos - sizes_[l - 1];
    }
    return c;
}

BitGenome::BitGenome(WeightFormat format, ParameterLayout layout)
    : format_(format), layout_(std::move(layout)) {
    const std::size_t n = layout_.n_weights();
    codes_.assign(n, gray_encode(0, format_.n_bits()));
    mults_.assign(n, 0);
    weights_.assign(n, 0.0);
}

void BitGenome::check_bit(std::size_t index) const {
    if (index >= n_bits())
        throw std::out_of_range("bit index " + std::to_string(index) + " out of range (genome has " +
                                std::to_string(n_bits()) + " bits)");
}

bool BitGenome::bit(std::size_t index) const {
    check_bit(index);
    const auto n = static_cast<std::size_t>(format_.n_bits());
    const std::size_t pos = index % n;
    return ((codes_[index / n] >> (n - 1 - pos)) & 1U) != 0;
}

double BitGenome::weight_after_flip(std::size_t index) const {
    check_bit(index);
    const auto n = static_cast<std::size_t>(format_.n_bits());
    const std::size_t pos = index % n;
    const std::uint32_t flipped = codes_[index / n] ^ (std::uint32_t{1} << (n - 1 - pos));
    return format_.value_of(gray_decode(flipped, format_.n_bits()));
}

FlipResult BitGenome::flip_bit(std::size_t index) {
    check_bit(index);
    const auto n = static_cast<std::size_t>(format_.n_bits());
    const std::size_t w = index / n;
    set_code(w, codes_[w] ^ (std::uint32_t{1} << (n - 1 - index % n)));
    return {w, weights_[w]};
}

void BitGenome::set_code(std::size_t w, std::uint32_t pattern) {
    const std::uint32_t mask = (std::uint32_t{1} << format_.n_bits()) - 1;
    codes_.at(w) = pattern & mask;
    mults_[w] = gray_decode(codes_[w], format_.n_bits());
    weights_[w] = format_.value_of(mults_[w]);
}

void BitGenome::set_multiplier(std::size_t w, std::int32_t h) {
    const std::uint32_t code = gray_encode(h, format_.n_bits());
    codes_.at(w) = code;
    mults_[w] = h;
    weights_[w] = format_.value_of(h);
}

void BitGenome::set_multipliers(std::span<const std::int32_t> hs) {
    if (hs.size() != n_weights())
        throw std::invalid_argument("expected " + std::to_string(n_weights()) + " multipliers, got " +
                                    std::to_string(hs.size()));
    for (std::size_t w = 0; w < hs.size(); ++w) set_multiplier(w, hs[w]);
}

}  // namespace tblm
