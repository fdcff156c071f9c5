#include "vinn/feature_maps.hpp"

#include "vinn/error.hpp"
#include "vinn/inference.hpp"

#include <algorithm>
#include <cmath>

namespace vinn {

std::optional<MaskVariant> parse_mask_variant(std::string_view name) {
    if (name == "current") return MaskVariant::current;
    if (name == "baseline") return MaskVariant::baseline;
    return std::nullopt;
}

std::optional<std::vector<float>> dead_channel_values(const Model& model, std::size_t layer_index) {
    const auto source = source_weighted_layer(model, layer_index);
    if (!source) return std::nullopt;
    const auto shapes = infer_shapes(model);
    std::vector<float> values = model.layers[*source].bias.data;
    for (auto i = *source + 1; i <= layer_index; ++i) {
        switch (model.layers[i].kind) {
            case LayerKind::relu:
                for (auto& v : values) v = v > 0.0f ? v : 0.0f;
                break;
            case LayerKind::flatten: {
                const auto& in = shapes[i - 1];
                if (in.size() == 3) {
                    std::vector<float> expanded;
                    expanded.reserve(shape_numel(in));
                    for (auto v : values) expanded.insert(expanded.end(), in[1] * in[2], v);
                    values = std::move(expanded);
                }
                break;
            }
            case LayerKind::maxpool2d: break;  // a constant plane pools to itself
            case LayerKind::dense:
            case LayerKind::conv2d: return std::nullopt;
        }
    }
    return values;
}

FeatureMapSet feature_maps(const Model& model, const MaskSet& masks, const Tensor& input, std::size_t layer_index) {
    if (layer_index >= model.layers.size()) {
        throw InvalidArgument("layer", "layer " + std::to_string(layer_index) + " out of range");
    }
    const auto activations = forward_all_activations(model, masks, input);
    const auto& out = activations[layer_index];
    const auto dead = dead_channel_values(model, layer_index);

    FeatureMapSet set;
    set.layer_index = layer_index;
    set.source_layer = source_weighted_layer(model, layer_index);

    const bool spatial = out.rank() == 3;
    const auto channels = spatial ? out.shape[0] : 1;
    const auto height = spatial ? out.shape[1] : 1;
    const auto width = spatial ? out.shape[2] : out.size();
    const auto per = height * width;
    for (std::size_t c = 0; c < channels; ++c) {
        FeatureMap map;
        map.channel = c;
        map.height = height;
        map.width = width;
        map.values.assign(out.data.begin() + static_cast<std::ptrdiff_t>(c * per),
                          out.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
        const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
        map.min = *lo;
        map.max = *hi;
        double sum = 0.0;
        for (auto v : map.values) sum += v;
        map.mean = sum / static_cast<double>(per);
        if (dead) {
            map.is_dead = true;
            for (std::size_t k = 0; k < per; ++k) {
                const double expected = spatial ? (*dead)[c] : (*dead)[k];
                if (std::fabs(static_cast<double>(map.values[k]) - expected) > dead_channel_tolerance) {
                    map.is_dead = false;
                    break;
                }
            }
        }
        set.maps.push_back(std::move(map));
    }
    return set;
}

FeatureMapSet feature_maps(const Session& session, std::size_t sample_index, std::size_t layer_index,
                           MaskVariant variant) {
    const auto& dataset = session.dataset();
    if (sample_index >= dataset.size()) {
        throw InvalidArgument("sample", "sample " + std::to_string(sample_index) + " out of range for " +
                                            std::to_string(dataset.size()) + " samples");
    }
    const MaskSet& masks = variant == MaskVariant::current ? session.current().masks : session.step(0).masks;
    auto set = feature_maps(session.model(), masks, dataset.sample_tensor(sample_index), layer_index);
    set.sample_index = sample_index;
    return set;
}

std::vector<ChannelActivity> channel_activity(const Model& model, const MaskSet& masks, const Dataset& dataset,
                                              std::size_t layer_index, std::size_t samples) {
    samples = std::min(samples, dataset.size());
    if (samples == 0) throw InvalidArgument("samples", "need at least one sample");
    std::vector<ChannelActivity> activity;
    for (std::size_t s = 0; s < samples; ++s) {
        const auto set = feature_maps(model, masks, dataset.sample_tensor(s), layer_index);
        if (activity.empty()) {
            activity.resize(set.maps.size());
            for (std::size_t c = 0; c < activity.size(); ++c) {
                activity[c].channel = c;
                activity[c].dead = true;
            }
        }
        for (const auto& map : set.maps) {
            double sum = 0.0;
            for (auto v : map.values) sum += std::fabs(static_cast<double>(v));
            activity[map.channel].mean_abs += sum / static_cast<double>(map.values.size());
            activity[map.channel].dead = activity[map.channel].dead && map.is_dead;
        }
    }
    for (auto& a : activity) a.mean_abs /= static_cast<double>(samples);
    return activity;
}

std::vector<std::size_t> low_activity_channels(const std::vector<ChannelActivity>& activity) {
    std::vector<std::size_t> order(activity.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return activity[a].mean_abs < activity[b].mean_abs; });
    const auto decile = (activity.size() + 9) / 10;
    std::vector<std::size_t> flagged;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto c = order[rank];
        if (rank < decile || activity[c].dead) flagged.push_back(activity[c].channel);
    }
    std::sort(flagged.begin(), flagged.end());
    return flagged;
}

MaskEdit mark_channel_from_feature_map(Session& session, std::size_t layer_index, std::size_t channel) {
    const auto& model = session.model();
    if (layer_index >= model.layers.size()) {
        throw InvalidArgument("layer", "layer " + std::to_string(layer_index) + " out of range");
    }
    const auto source = source_weighted_layer(model, layer_index);
    if (!source) throw InvalidArgument("layer", "layer " + std::to_string(layer_index) + " has no prunable channels");
    return session.toggle_channel_mark(*source, channel);
}

}  // namespace vinn
