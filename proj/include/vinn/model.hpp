#pragma once

#include "vinn/tensor.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vinn {

enum class LayerKind { dense, conv2d, relu, maxpool2d, flatten };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

/// One layer of a sequential network.
///
/// dense:     weight [out_units, in_units], bias [out_units]
/// conv2d:    weight [out_ch, in_ch, kh, kw], bias [out_ch], stride, padding
/// maxpool2d: window, stride
///
/// Only dense and conv2d carry weights (and therefore masks).
struct Layer {
    LayerKind kind = LayerKind::relu;
    Tensor weight;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t window = 0;

    bool weighted() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    static Layer dense(Tensor weight, Tensor bias);
    static Layer conv2d(Tensor weight, Tensor bias, std::size_t stride = 1, std::size_t padding = 0);
    static Layer relu();
    static Layer maxpool2d(std::size_t window, std::size_t stride);
    static Layer flatten();

    bool operator==(const Layer&) const = default;
};

struct Model {
    std::string name;
    Shape input_shape;
    std::vector<Layer> layers;

    bool operator==(const Model&) const = default;
};

/// Output shape of every layer, in order. Throws ShapeError at the first
/// layer whose input does not fit, or if the model has no weighted layer.
std::vector<Shape> infer_shapes(const Model& model);

/// Input shape seen by layer `index` (the model input for index 0).
Shape layer_input_shape(const Model& model, std::size_t index);

std::vector<std::size_t> weighted_layer_indices(const Model& model);

std::size_t num_classes(const Model& model);

/// Nearest weighted layer at or before `index`, skipping relu/pool/flatten.
std::optional<std::size_t> source_weighted_layer(const Model& model, std::size_t index);

struct Dataset {
    std::string name;
    Tensor samples;  // [N, ...input_shape]
    std::vector<std::uint32_t> labels;
    std::vector<std::string> class_names;

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    Shape sample_shape() const { return Shape(samples.shape.begin() + 1, samples.shape.end()); }
    std::span<const float> sample(std::size_t i) const;
    Tensor sample_tensor(std::size_t i) const;

    bool operator==(const Dataset&) const = default;
};

void validate(const Dataset& dataset);

/// Throws if the dataset cannot be fed through the model.
void check_compatible(const Model& model, const Dataset& dataset);

}  // namespace vinn
