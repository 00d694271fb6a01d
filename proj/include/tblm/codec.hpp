#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tblm {

/// Gray-coded n-bit weight format.
///
/// A weight is h * epsilon with h an n-bit two's-complement multiplier and
/// epsilon = w_max / (2^(n-1) - 1), so w_max is representable exactly and the
/// smallest value is -w_max - epsilon.
class WeightFormat {
public:
    static constexpr int kMinBits = 2;
    static constexpr int kMaxBits = 24;

    WeightFormat(int n_bits, double w_max);

    int n_bits() const noexcept { return n_bits_; }
    double w_max() const noexcept { return w_max_; }
    double epsilon() const noexcept { return epsilon_; }

    std::int32_t min_multiplier() const noexcept { return -(std::int32_t{1} << (n_bits_ - 1)); }
    std::int32_t max_multiplier() const noexcept { return (std::int32_t{1} << (n_bits_ - 1)) - 1; }
    double min_weight() const noexcept { return min_multiplier() * epsilon_; }

    double value_of(std::int32_t h) const noexcept { return h * epsilon_; }

    /// Nearest representable multiplier, clamped to the range.
    std::int32_t nearest_multiplier(double w) const noexcept;

    bool operator==(const WeightFormat&) const = default;

private:
    int n_bits_;
    double w_max_;
    double epsilon_;
};

/// Binary-reflected Gray code of the offset-binary image h + 2^(n-1).
/// The returned integer holds the pattern in its low n bits; its most
/// significant bit is bit position 0 of the weight's group.
std::uint32_t gray_encode(std::int32_t h, int n);

/// Inverse of gray_encode. Total on n-bit patterns.
std::int32_t gray_decode(std::uint32_t pattern, int n);

enum class ParamKind { weight, recurrent, bias };

/// Address of one network parameter. `layer` counts from 1 (first non-input
/// layer); `from` indexes the previous layer for weights, the hidden layer
/// itself for recurrent weights, and is ignored for biases.
struct ParamCoord {
    std::size_t layer = 1;
    std::size_t to = 0;
    std::size_t from = 0;
    ParamKind kind = ParamKind::weight;

    bool operator==(const ParamCoord&) const = default;
};

/// Bijection between parameter coordinates and weight-group indices.
///
/// Order: layer-major, then destination neuron; within a destination neuron
/// the feed-forward sources come first, then (layer 1 of a recurrent net) the
/// recurrent sources, then the bias.
class ParameterLayout {
public:
    ParameterLayout() = default;
    ParameterLayout(std::vector<std::size_t> layer_sizes, bool recurrent);

    std::size_t n_layers() const noexcept { return sizes_.empty() ? 0 : sizes_.size() - 1; }
    std::size_t layer_size(std::size_t l) const { return sizes_.at(l); }
    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    bool recurrent() const noexcept { return recurrent_; }
    std::size_t n_weights() const noexcept { return total_; }

    /// First weight index of layer l (1-based layer).
    std::size_t layer_offset(std::size_t l) const { return offsets_.at(l); }
    /// Number of parameters feeding one neuron of layer l.
    std::size_t row_stride(std::size_t l) const { return strides_.at(l); }

    std::size_t index_of(const ParamCoord& c) const;
    ParamCoord coord_of(std::size_t index) const;

    bool operator==(const ParameterLayout&) const = default;

private:
    std::vector<std::size_t> sizes_;
    bool recurrent_ = false;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> strides_;
    std::size_t total_ = 0;
};

struct FlipResult {
    std::size_t weight_index;
    double new_weight;
};

/// All network parameters as a flat, addressable bit string.
///
/// Bit b belongs to weight b / n at group position b % n; position 0 is the
/// most significant Gray bit. Decoded multipliers and weights are kept in
/// sync with the bits so that reading a weight is a plain array access.
class BitGenome {
public:
    BitGenome(WeightFormat format, ParameterLayout layout);

    const WeightFormat& format() const noexcept { return format_; }
    const ParameterLayout& layout() const noexcept { return layout_; }

    std::size_t n_weights() const noexcept { return codes_.size(); }
    std::size_t n_bits() const noexcept { return codes_.size() * static_cast<std::size_t>(format_.n_bits()); }

    bool bit(std::size_t index) const;
    FlipResult flip_bit(std::size_t index);

    std::size_t weight_index_of_bit(std::size_t index) const noexcept {
        return index / static_cast<std::size_t>(format_.n_bits());
    }
    /// Value the affected weight would take if `index` were flipped.
    double weight_after_flip(std::size_t index) const;

    std::uint32_t code(std::size_t w) const { return codes_.at(w); }
    std::int32_t multiplier(std::size_t w) const { return mults_.at(w); }
    double weight(std::size_t w) const { return weights_.at(w); }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const std::int32_t> multipliers() const noexcept { return mults_; }

    double weight_of(const ParamCoord& c) const { return weights_[layout_.index_of(c)]; }

    void set_multiplier(std::size_t w, std::int32_t h);
    void set_code(std::size_t w, std::uint32_t pattern);
    void set_multipliers(std::span<const std::int32_t> hs);

    bool operator==(const BitGenome& o) const { return format_ == o.format_ && layout_ == o.layout_ && codes_ == o.codes_; }

private:
    void check_bit(std::size_t index) const;

    WeightFormat format_;
    ParameterLayout layout_;
    std::vector<std::uint32_t> codes_;
    std::vector<std::int32_t> mults_;
    std::vector<double> weights_;
};

}  // namespace tblm
