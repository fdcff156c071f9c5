#include "vinn/model.hpp"

#include "vinn/error.hpp"
#include "vinn/inference.hpp"

#include <algorithm>

namespace vinn {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
    for (auto kind : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2d,
                      LayerKind::flatten}) {
        if (to_string(kind) == name) return kind;
    }
    return std::nullopt;
}

Layer Layer::dense(Tensor weight, Tensor bias) {
    Layer l;
    l.kind = LayerKind::dense;
    l.weight = std::move(weight);
    l.bias = std::move(bias);
    return l;
}

Layer Layer::conv2d(Tensor weight, Tensor bias, std::size_t stride, std::size_t padding) {
    Layer l;
    l.kind = LayerKind::conv2d;
    l.weight = std::move(weight);
    l.bias = std::move(bias);
    l.stride = stride;
    l.padding = padding;
    return l;
}

Layer Layer::relu() { return Layer{}; }

Layer Layer::maxpool2d(std::size_t window, std::size_t stride) {
    Layer l;
    l.kind = LayerKind::maxpool2d;
    l.window = window;
    l.stride = stride;
    return l;
}

Layer Layer::flatten() {
    Layer l;
    l.kind = LayerKind::flatten;
    return l;
}

namespace {

Shape output_shape(const Layer& layer, const Shape& in, std::size_t index) {
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) throw ShapeError(index, what);
    };
    switch (layer.kind) {
        case LayerKind::dense: {
            expect(layer.weight.rank() == 2, "dense weight must be 2-d, got " + shape_to_string(layer.weight.shape));
            const auto out = layer.weight.shape[0];
            const auto in_units = layer.weight.shape[1];
            expect(layer.bias.shape == Shape{out},
                   "bias shape " + shape_to_string(layer.bias.shape) + " expected " + shape_to_string(Shape{out}));
            expect(in == Shape{in_units},
                   "dense expects input " + shape_to_string(Shape{in_units}) + ", got " + shape_to_string(in));
            return {out};
        }
        case LayerKind::conv2d: {
            expect(layer.weight.rank() == 4, "conv2d weight must be 4-d, got " + shape_to_string(layer.weight.shape));
            const auto& w = layer.weight.shape;
            expect(layer.bias.shape == Shape{w[0]},
                   "bias shape " + shape_to_string(layer.bias.shape) + " expected " + shape_to_string(Shape{w[0]}));
            expect(layer.stride > 0, "stride must be positive");
            expect(in.size() == 3 && in[0] == w[1],
                   "conv2d expects input [" + std::to_string(w[1]) + ", H, W], got " + shape_to_string(in));
            try {
                return {w[0], conv_output_dim(in[1], w[2], layer.stride, layer.padding),
                        conv_output_dim(in[2], w[3], layer.stride, layer.padding)};
            } catch (const Error& e) {
                throw ShapeError(index, e.what());
            }
        }
        case LayerKind::maxpool2d: {
            expect(layer.window > 0 && layer.stride > 0, "maxpool2d window and stride must be positive");
            expect(in.size() == 3, "maxpool2d expects [C, H, W] input, got " + shape_to_string(in));
            try {
                return {in[0], conv_output_dim(in[1], layer.window, layer.stride, 0),
                        conv_output_dim(in[2], layer.window, layer.stride, 0)};
            } catch (const Error& e) {
                throw ShapeError(index, e.what());
            }
        }
        case LayerKind::relu: return in;
        case LayerKind::flatten: return {shape_numel(in)};
    }
    throw ShapeError(index, "unknown layer kind");
}

}  // namespace

std::vector<Shape> infer_shapes(const Model& model) {
    if (model.input_shape.empty() ||
        std::any_of(model.input_shape.begin(), model.input_shape.end(), [](auto d) { return d == 0; })) {
        throw ShapeError(0, "invalid input shape " + shape_to_string(model.input_shape));
    }
    std::vector<Shape> shapes;
    shapes.reserve(model.layers.size());
    Shape current = model.input_shape;
    bool any_weighted = false;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        current = output_shape(model.layers[i], current, i);
        any_weighted = any_weighted || model.layers[i].weighted();
        shapes.push_back(current);
    }
    if (!any_weighted) throw ShapeError(model.layers.size(), "model has no weighted layer");
    return shapes;
}

Shape layer_input_shape(const Model& model, std::size_t index) {
    if (index == 0) return model.input_shape;
    return infer_shapes(model).at(index - 1);
}

std::vector<std::size_t> weighted_layer_indices(const Model& model) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (model.layers[i].weighted()) out.push_back(i);
    }
    return out;
}

std::size_t num_classes(const Model& model) {
    const auto shapes = infer_shapes(model);
    return shape_numel(shapes.back());
}

std::optional<std::size_t> source_weighted_layer(const Model& model, std::size_t index) {
    for (std::size_t i = index + 1; i-- > 0;) {
        if (model.layers.at(i).weighted()) return i;
    }
    return std::nullopt;
}

std::span<const float> Dataset::sample(std::size_t i) const {
    const auto per = shape_numel(sample_shape());
    return std::span<const float>(samples.data).subspan(i * per, per);
}

Tensor Dataset::sample_tensor(std::size_t i) const {
    auto s = sample(i);
    return Tensor(sample_shape(), std::vector<float>(s.begin(), s.end()));
}

void validate(const Dataset& dataset) {
    if (dataset.labels.empty()) throw Error("dataset '" + dataset.name + "' is empty");
    if (dataset.samples.rank() < 2 || dataset.samples.shape[0] != dataset.labels.size()) {
        throw Error("dataset '" + dataset.name + "': samples shape " + shape_to_string(dataset.samples.shape) +
                    " does not match " + std::to_string(dataset.labels.size()) + " labels");
    }
    if (shape_numel(dataset.samples.shape) != dataset.samples.size()) throw Error("dataset sample buffer size mismatch");
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        if (dataset.labels[i] >= dataset.num_classes()) {
            throw Error("dataset '" + dataset.name + "': label " + std::to_string(dataset.labels[i]) + " at sample " +
                        std::to_string(i) + " exceeds class count " + std::to_string(dataset.num_classes()));
        }
    }
}

void check_compatible(const Model& model, const Dataset& dataset) {
    validate(dataset);
    if (dataset.sample_shape() != model.input_shape) {
        throw ShapeError(0, "dataset sample shape " + shape_to_string(dataset.sample_shape()) +
                                " does not match model input " + shape_to_string(model.input_shape));
    }
    if (num_classes(model) != dataset.num_classes()) {
        throw Error("model produces " + std::to_string(num_classes(model)) + " scores but dataset has " +
                    std::to_string(dataset.num_classes()) + " classes");
    }
}

}  // namespace vinn
