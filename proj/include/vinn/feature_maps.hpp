#pragma once

#include "vinn/mask.hpp"
#include "vinn/model.hpp"
#include "vinn/pruning.hpp"
#include "vinn/session.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace vinn {

/// Absolute tolerance for calling a channel dead.
inline constexpr double dead_channel_tolerance = 1e-7;

struct FeatureMap {
    std::size_t channel = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;  // raw, row-major
    float min = 0.0f;
    float max = 0.0f;
    double mean = 0.0;
    /// Every value equals what a fully pruned source channel would emit.
    bool is_dead = false;

    bool operator==(const FeatureMap&) const = default;
};

struct FeatureMapSet {
    std::size_t sample_index = 0;
    std::size_t layer_index = 0;
    std::optional<std::size_t> source_layer;  // weighted layer the channels belong to
    std::vector<FeatureMap> maps;

    bool operator==(const FeatureMapSet&) const = default;
};

enum class MaskVariant { current, baseline };

std::optional<MaskVariant> parse_mask_variant(std::string_view name);

/// Constant output of each channel of layer `layer_index` when every weight
/// of its source channel is pruned: the source bias pushed through the
/// element-wise layers in between. Empty when the layer has no weighted
/// source or a dense layer intervenes in a way that mixes channels.
std::optional<std::vector<float>> dead_channel_values(const Model& model, std::size_t layer_index);

/// Splits one layer's output into per-channel maps. [C, H, W] outputs give C
/// maps; 1-d outputs give a single 1 x n map, dead only when every unit sits at
/// its own dead value.
FeatureMapSet feature_maps(const Model& model, const MaskSet& masks, const Tensor& input, std::size_t layer_index);

FeatureMapSet feature_maps(const Session& session, std::size_t sample_index, std::size_t layer_index,
                           MaskVariant variant);

struct ChannelActivity {
    std::size_t channel = 0;
    double mean_abs = 0.0;  // mean |activation| over all positions and samples
    bool dead = false;      // dead on every sample inspected
};

/// Per-channel activity of layer `layer_index` over the first `samples`
/// dataset samples.
std::vector<ChannelActivity> channel_activity(const Model& model, const MaskSet& masks, const Dataset& dataset,
                                              std::size_t layer_index, std::size_t samples);

/// Channels that are dead, or whose mean |activation| ranks in the bottom
/// decile (at least one channel; ties resolved toward the lower index).
std::vector<std::size_t> low_activity_channels(const std::vector<ChannelActivity>& activity);

/// Resolves a click on channel `channel` of the feature maps of
/// `layer_index` to the weighted layer owning that channel and toggles its
/// mark. The returned edit is not applied.
MaskEdit mark_channel_from_feature_map(Session& session, std::size_t layer_index, std::size_t channel);

}  // namespace vinn
