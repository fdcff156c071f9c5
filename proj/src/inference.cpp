#include "vinn/inference.hpp"

#include "vinn/error.hpp"

#include <algorithm>

namespace vinn {

std::size_t conv_output_dim(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw Error("stride must be positive");
    if (in + 2 * padding < kernel) {
        throw Error("kernel " + std::to_string(kernel) + " exceeds padded input " + std::to_string(in + 2 * padding));
    }
    return (in + 2 * padding - kernel) / stride + 1;
}

Tensor dense_forward(const Tensor& weight, const Tensor& bias, const Tensor& input) {
    const auto out_units = weight.shape.at(0);
    const auto in_units = weight.shape.at(1);
    if (input.size() != in_units) throw Error("dense input has " + std::to_string(input.size()) + " units");
    Tensor out({out_units});
    for (std::size_t o = 0; o < out_units; ++o) {
        const float* row = weight.data.data() + o * in_units;
        float acc = 0.0f;
        for (std::size_t i = 0; i < in_units; ++i) acc += row[i] * input[i];
        out[o] = acc + bias[o];
    }
    return out;
}

Tensor conv2d_forward(const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding,
                      const Tensor& input) {
    if (weight.rank() != 4 || input.rank() != 3 || input.shape[0] != weight.shape[1]) {
        throw Error("conv2d weight " + shape_to_string(weight.shape) + " does not fit input " +
                    shape_to_string(input.shape));
    }
    const auto out_ch = weight.shape[0], in_ch = weight.shape[1], kh = weight.shape[2], kw = weight.shape[3];
    const auto in_h = input.shape[1], in_w = input.shape[2];
    const auto out_h = conv_output_dim(in_h, kh, stride, padding);
    const auto out_w = conv_output_dim(in_w, kw, stride, padding);

    Tensor out({out_ch, out_h, out_w});
    // Padded coordinates are shifted by `padding`; taps landing outside the
    // input read zero and are skipped.
    for (std::size_t o = 0; o < out_ch; ++o) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                float acc = 0.0f;
                for (std::size_t c = 0; c < in_ch; ++c) {
                    const float* kernel = weight.data.data() + ((o * in_ch + c) * kh) * kw;
                    const float* plane = input.data.data() + c * in_h * in_w;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const auto py = y * stride + ky;
                        if (py < padding || py - padding >= in_h) continue;
                        const float* in_row = plane + (py - padding) * in_w;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const auto px = x * stride + kx;
                            if (px < padding || px - padding >= in_w) continue;
                            acc += kernel[ky * kw + kx] * in_row[px - padding];
                        }
                    }
                }
                out[(o * out_h + y) * out_w + x] = acc + bias[o];
            }
        }
    }
    return out;
}

Tensor maxpool2d_forward(std::size_t window, std::size_t stride, const Tensor& input) {
    if (input.rank() != 3) throw Error("maxpool2d expects [C, H, W], got " + shape_to_string(input.shape));
    const auto ch = input.shape[0], in_h = input.shape[1], in_w = input.shape[2];
    const auto out_h = conv_output_dim(in_h, window, stride, 0);
    const auto out_w = conv_output_dim(in_w, window, stride, 0);
    Tensor out({ch, out_h, out_w});
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                float best = input[(c * in_h + y * stride) * in_w + x * stride];
                for (std::size_t wy = 0; wy < window; ++wy) {
                    for (std::size_t wx = 0; wx < window; ++wx) {
                        best = std::max(best, input[(c * in_h + y * stride + wy) * in_w + x * stride + wx]);
                    }
                }
                out[(c * out_h + y) * out_w + x] = best;
            }
        }
    }
    return out;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

MaskedNetwork::MaskedNetwork(const Model& model, const MaskSet& masks) : model_(&model) {
    infer_shapes(model);
    check_congruent(model, masks);
    effective_weights_.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        if (!layer.weighted()) continue;
        auto it = masks.find(i);
        effective_weights_[i] = it == masks.end() ? layer.weight : apply_mask(layer.weight, it->second.bits);
    }
}

Tensor MaskedNetwork::wrap_input(std::span<const float> input) const {
    if (input.size() != shape_numel(model_->input_shape)) {
        throw ShapeError(0, "input has " + std::to_string(input.size()) + " values, model expects " +
                                shape_to_string(model_->input_shape));
    }
    return Tensor(model_->input_shape, std::vector<float>(input.begin(), input.end()));
}

Tensor MaskedNetwork::run_layer(std::size_t index, const Tensor& input) const {
    const auto& layer = model_->layers[index];
    switch (layer.kind) {
        case LayerKind::dense: return dense_forward(effective_weights_[index], layer.bias, input);
        case LayerKind::conv2d:
            return conv2d_forward(effective_weights_[index], layer.bias, layer.stride, layer.padding, input);
        case LayerKind::relu: return relu_forward(input);
        case LayerKind::maxpool2d: return maxpool2d_forward(layer.window, layer.stride, input);
        case LayerKind::flatten: return Tensor({input.size()}, input.data);
    }
    throw ShapeError(index, "unknown layer kind");
}

Tensor MaskedNetwork::forward(std::span<const float> input) const {
    Tensor x = wrap_input(input);
    for (std::size_t i = 0; i < model_->layers.size(); ++i) x = run_layer(i, x);
    return x;
}

std::vector<Tensor> MaskedNetwork::activations(std::span<const float> input) const {
    std::vector<Tensor> out;
    out.reserve(model_->layers.size());
    Tensor x = wrap_input(input);
    for (std::size_t i = 0; i < model_->layers.size(); ++i) {
        x = run_layer(i, x);
        out.push_back(x);
    }
    return out;
}

namespace {
void check_input_shape(const Model& model, const Tensor& input) {
    if (input.shape != model.input_shape) {
        throw ShapeError(0, "input shape " + shape_to_string(input.shape) + " does not match model input " +
                                shape_to_string(model.input_shape));
    }
}
}  // namespace

Tensor forward(const Model& model, const MaskSet& masks, const Tensor& input) {
    check_input_shape(model, input);
    return MaskedNetwork(model, masks).forward(input.data);
}

Tensor forward(const Model& model, const Tensor& input) { return forward(model, MaskSet{}, input); }

std::vector<Tensor> forward_all_activations(const Model& model, const MaskSet& masks, const Tensor& input) {
    check_input_shape(model, input);
    return MaskedNetwork(model, masks).activations(input.data);
}

}  // namespace vinn
