#pragma once

#include "vinn/model.hpp"
#include "vinn/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace vinn {

/// Binary keep/prune mask for one weighted layer. 1 = kept, 0 = pruned.
struct PruneMask {
    std::size_t layer_index = 0;
    MaskBits bits;

    std::size_t total() const { return bits.size(); }
    std::size_t kept_count() const;
    std::size_t pruned_count() const { return total() - kept_count(); }

    bool operator==(const PruneMask&) const = default;
};

/// Masks keyed by layer index. Weighted layers without an entry are unmasked.
using MaskSet = std::map<std::size_t, PruneMask>;

/// All-ones masks for every weighted layer.
MaskSet full_masks(const Model& model);

/// Throws ShapeError if a mask references a non-weighted layer or its shape
/// differs from the layer's weight.
void check_congruent(const Model& model, const MaskSet& masks);

/// Copy of `weight` with every pruned entry set to 0.0f.
Tensor apply_mask(const Tensor& weight, const MaskBits& bits);

/// Packs bits in flat-index order, least significant bit first within each
/// byte; the tail of the last byte is zero.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count);

/// FNV-1a over (layer index, packed bits) of every mask, in layer order.
std::uint64_t mask_hash(const MaskSet& masks);

/// True when out-channel (conv) or output row (dense) `channel` is fully pruned.
bool channel_fully_pruned(const PruneMask& mask, std::size_t channel);

}  // namespace vinn
