#include "vinn/mask.hpp"

#include "vinn/error.hpp"

#include <algorithm>

namespace vinn {

std::size_t PruneMask::kept_count() const {
    return static_cast<std::size_t>(std::count(bits.data.begin(), bits.data.end(), std::uint8_t{1}));
}

MaskSet full_masks(const Model& model) {
    MaskSet masks;
    for (auto index : weighted_layer_indices(model)) {
        masks.emplace(index, PruneMask{index, MaskBits(model.layers[index].weight.shape, 1)});
    }
    return masks;
}

void check_congruent(const Model& model, const MaskSet& masks) {
    for (const auto& [index, mask] : masks) {
        if (index >= model.layers.size() || !model.layers[index].weighted()) {
            throw ShapeError(index, "mask given for a layer without weights");
        }
        if (mask.layer_index != index) throw ShapeError(index, "mask is keyed under the wrong layer");
        if (mask.bits.shape != model.layers[index].weight.shape || mask.bits.size() != shape_numel(mask.bits.shape)) {
            throw ShapeError(index, "mask shape " + shape_to_string(mask.bits.shape) + " does not match weight shape " +
                                        shape_to_string(model.layers[index].weight.shape));
        }
    }
}

Tensor apply_mask(const Tensor& weight, const MaskBits& bits) {
    Tensor out = weight;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (bits[i] == 0) out[i] = 0.0f;
    }
    return out;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return packed;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count) {
    if (packed.size() != (count + 7) / 8) {
        throw Error("packed mask has " + std::to_string(packed.size()) + " bytes, expected " +
                    std::to_string((count + 7) / 8) + " for " + std::to_string(count) + " bits");
    }
    std::vector<std::uint8_t> bits(count);
    for (std::size_t i = 0; i < count; ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    if (count % 8 != 0 && (packed.back() >> (count % 8)) != 0) {
        throw Error("packed mask has non-zero padding bits");
    }
    return bits;
}

std::uint64_t mask_hash(const MaskSet& masks) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 0x100000001b3ull;
    };
    for (const auto& [index, mask] : masks) {
        for (int shift = 0; shift < 64; shift += 8) mix(static_cast<std::uint8_t>(std::uint64_t{index} >> shift));
        for (auto byte : pack_bits(mask.bits.data)) mix(byte);
    }
    return h;
}

bool channel_fully_pruned(const PruneMask& mask, std::size_t channel) {
    const auto per = mask.bits.size() / mask.bits.shape.at(0);
    auto first = mask.bits.data.begin() + static_cast<std::ptrdiff_t>(channel * per);
    return std::all_of(first, first + static_cast<std::ptrdiff_t>(per), [](auto b) { return b == 0; });
}

}  // namespace vinn
