#pragma once

#include "vinn/mask.hpp"
#include "vinn/model.hpp"
#include "vinn/tensor.hpp"

#include <span>
#include <vector>

namespace vinn {

// Single-layer kernels. All arithmetic is float32; accumulation runs over the
// reduction indices in row-major order and the bias is added last.

Tensor dense_forward(const Tensor& weight, const Tensor& bias, const Tensor& input);

/// Cross-correlation (no kernel flip) with symmetric zero padding.
/// Input [in_ch, H, W], weight [out_ch, in_ch, kh, kw].
Tensor conv2d_forward(const Tensor& weight, const Tensor& bias, std::size_t stride,
                      std::size_t padding, const Tensor& input);

Tensor maxpool2d_forward(std::size_t window, std::size_t stride, const Tensor& input);

Tensor relu_forward(const Tensor& input);

/// floor((in + 2*padding - k) / stride) + 1; throws Error when that would be < 1.
std::size_t conv_output_dim(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

/// A model with its masks folded into effective weights, ready to run many
/// inputs. The source model is never modified.
class MaskedNetwork {
public:
    MaskedNetwork(const Model& model, const MaskSet& masks);

    const Model& model() const { return *model_; }

    /// Pre-softmax class scores.
    Tensor forward(std::span<const float> input) const;

    /// Output of every layer; the last element equals forward().
    std::vector<Tensor> activations(std::span<const float> input) const;

private:
    Tensor run_layer(std::size_t index, const Tensor& input) const;
    Tensor wrap_input(std::span<const float> input) const;

    const Model* model_;
    std::vector<Tensor> effective_weights_;  // empty for non-weighted layers
};

Tensor forward(const Model& model, const MaskSet& masks, const Tensor& input);
Tensor forward(const Model& model, const Tensor& input);

std::vector<Tensor> forward_all_activations(const Model& model, const MaskSet& masks, const Tensor& input);

}  // namespace vinn
