#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tblm {

class Rng;

enum class TaskKind { regression, classification };

/// Row-major sample matrices plus column metadata.
struct Dataset {
    std::size_t n_inputs = 0;
    std::size_t n_outputs = 0;
    std::vector<double> inputs;   // samples x n_inputs
    std::vector<double> targets;  // samples x n_outputs
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    TaskKind kind = TaskKind::regression;
    std::size_t n_classes = 0;

    std::size_t size() const noexcept { return n_inputs ? inputs.size() / n_inputs : 0; }
    std::span<const double> input(std::size_t i) const { return {inputs.data() + i * n_inputs, n_inputs}; }
    std::span<const double> target(std::size_t i) const { return {targets.data() + i * n_outputs, n_outputs}; }
    void push_back(std::span<const double> in, std::span<const double> out);
};

/// Per-column affine maps value -> value * scale + offset.
struct NormalizationParams {
    std::vector<double> input_scale, input_offset;
    std::vector<double> output_scale, output_offset;

    void apply(Dataset& d) const;
    /// Inverse map on a row-major target matrix.
    std::vector<double> denormalize_targets(std::span<const double> normalized) const;
};

struct SplitResult {
    Dataset train;
    Dataset validation;
    NormalizationParams params;
    std::vector<std::string> warnings;
};

/// Fits inputs onto [-1, 1] and (regression only) targets onto [0, 1]. A
/// column with zero range maps to the constant 0.
NormalizationParams fit_normalization(const Dataset& train, std::vector<std::string>* warnings = nullptr);

/// Seeded shuffle, split into round(fraction * n) training rows and the
/// rest, normalization fitted on the training rows and applied to both.
SplitResult normalize_split(const Dataset& data, double train_fraction, Rng& rng);

struct TwoSpirals {
    Dataset train;
    Dataset test;
};

/// CMU two-spirals construction, 97 points per spiral per set. The test set
/// is rotated by half the angular step. Inputs are normalized with the
/// training-set fit.
TwoSpirals two_spirals();
/// Raw (unnormalized) points; `phase` is added to every angle.
Dataset two_spirals_raw(double phase);

enum class ColumnRole { input, nominal, target, class_label, skip };

/// Comma list of roles in column order: input|num, nominal|nom, target|out,
/// class, skip|-.
std::vector<ColumnRole> parse_schema(std::string_view schema);

/// Comma-separated file with a header row. Numeric inputs pass through;
/// each nominal input expands into one +/-1 column per level (levels sorted);
/// class labels become unary target rows.
Dataset load_csv(const std::filesystem::path& path, std::span<const ColumnRole> roles);
Dataset parse_csv(std::string_view text, std::span<const ColumnRole> roles, std::string_view source = "<memory>");

void write_csv(const Dataset& d, const std::filesystem::path& path, std::string_view header_comment = {});

}  // namespace tblm
