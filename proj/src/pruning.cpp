#include "vinn/pruning.hpp"

#include "vinn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace vinn {

std::string_view to_string(PruneAlgorithm algorithm) {
    switch (algorithm) {
        case PruneAlgorithm::map: return "map";
        case PruneAlgorithm::lap: return "lap";
        case PruneAlgorithm::lap_forward: return "lap_forward";
        case PruneAlgorithm::lap_backward: return "lap_backward";
        case PruneAlgorithm::manual: return "manual";
    }
    return "unknown";
}

std::optional<PruneAlgorithm> parse_algorithm(std::string_view name) {
    std::string normalized(name);
    std::replace(normalized.begin(), normalized.end(), '-', '_');
    for (auto a : {PruneAlgorithm::map, PruneAlgorithm::lap, PruneAlgorithm::lap_forward,
                   PruneAlgorithm::lap_backward, PruneAlgorithm::manual}) {
        if (to_string(a) == normalized) return a;
    }
    return std::nullopt;
}

double PruneSettings::ratio_for(std::size_t layer_index) const {
    auto it = per_layer_ratio.find(layer_index);
    return it == per_layer_ratio.end() ? global_ratio : it->second;
}

namespace {
bool valid_ratio(double r) { return std::isfinite(r) && r >= 0.0 && r <= 1.0; }
}  // namespace

void validate(const PruneSettings& settings, const Model& model) {
    if (!valid_ratio(settings.global_ratio)) throw InvalidArgument("global_ratio", "must be within [0, 1]");
    for (const auto& [layer, ratio] : settings.per_layer_ratio) {
        const auto field = "per_layer_ratio." + std::to_string(layer);
        if (layer >= model.layers.size() || !model.layers[layer].weighted()) {
            throw InvalidArgument(field, "layer " + std::to_string(layer) + " has no weights");
        }
        if (!valid_ratio(ratio)) throw InvalidArgument(field, "must be within [0, 1]");
    }
}

ScoreTensor map_scores(const Tensor& weight) {
    ScoreTensor scores(weight.shape);
    for (std::size_t i = 0; i < weight.size(); ++i) scores[i] = std::fabs(static_cast<double>(weight[i]));
    return scores;
}

namespace {

// Flat positions of a following dense layer that one producer channel feeds:
// H*W when a flatten of a [C, H, W] tensor sits between the two layers.
std::size_t units_per_channel(const Model& model, const std::vector<Shape>& shapes, std::size_t producer,
                              std::size_t consumer) {
    for (std::size_t k = producer + 1; k < consumer; ++k) {
        if (model.layers[k].kind == LayerKind::flatten) {
            const auto& in = shapes[k - 1];
            return in.size() == 3 ? in[1] * in[2] : 1;
        }
    }
    return 1;
}

Tensor masked_weight(const Model& model, const MaskSet& masks, std::size_t index) {
    auto it = masks.find(index);
    const auto& w = model.layers[index].weight;
    return it == masks.end() ? w : apply_mask(w, it->second.bits);
}

// Norm of each output slice [c, ...] of a weighted layer.
std::vector<double> producer_norms(const Tensor& weight) {
    const auto channels = weight.shape[0];
    const auto per = weight.size() / channels;
    std::vector<double> norms(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (std::size_t k = 0; k < per; ++k) {
            const double v = weight[c * per + k];
            sum += v * v;
        }
        norms[c] = std::sqrt(sum);
    }
    return norms;
}

// Norm of the weights consuming each of `channels` producer channels, where
// every producer channel feeds `group` consecutive input units/channels.
std::vector<double> consumer_norms(const Tensor& weight, std::size_t channels, std::size_t group) {
    const auto out = weight.shape[0];
    const auto in = weight.shape[1];
    const auto inner = weight.size() / (out * in);  // kh*kw for conv, 1 for dense
    std::vector<double> sums(channels, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t j = 0; j < in; ++j) {
            const auto channel = j / group;
            for (std::size_t k = 0; k < inner; ++k) {
                const double v = weight[(o * in + j) * inner + k];
                sums[channel] += v * v;
            }
        }
    }
    for (auto& s : sums) s = std::sqrt(s);
    return sums;
}

}  // namespace

ScoreTensor lap_scores(const Model& model, const MaskSet& masks, std::size_t layer_index, LapMode mode) {
    if (layer_index >= model.layers.size() || !model.layers[layer_index].weighted()) {
        throw InvalidArgument("layer_index", "layer " + std::to_string(layer_index) + " has no weights");
    }
    const auto shapes = infer_shapes(model);
    const auto weighted = weighted_layer_indices(model);
    const auto pos = static_cast<std::size_t>(std::find(weighted.begin(), weighted.end(), layer_index) - weighted.begin());

    const auto& weight = model.layers[layer_index].weight;
    const auto out_units = weight.shape[0];
    const auto in_units = weight.shape[1];
    const auto inner = weight.size() / (out_units * in_units);

    std::vector<double> prev(in_units, 1.0);
    if (mode != LapMode::forward && pos > 0) {
        const auto producer = weighted[pos - 1];
        const auto group = units_per_channel(model, shapes, producer, layer_index);
        const auto norms = producer_norms(masked_weight(model, masks, producer));
        for (std::size_t j = 0; j < in_units; ++j) prev[j] = norms[j / group];
    }

    std::vector<double> next(out_units, 1.0);
    if (mode != LapMode::backward && pos + 1 < weighted.size()) {
        const auto consumer = weighted[pos + 1];
        const auto group = units_per_channel(model, shapes, layer_index, consumer);
        next = consumer_norms(masked_weight(model, masks, consumer), out_units, group);
    }

    ScoreTensor scores(weight.shape);
    for (std::size_t i = 0; i < weight.size(); ++i) {
        const auto o = i / (in_units * inner);
        const auto j = (i / inner) % in_units;
        scores[i] = std::fabs(static_cast<double>(weight[i])) * prev[j] * next[o];
    }
    return scores;
}

PruneMask prune_by_ratio(const ScoreTensor& scores, const PruneMask& current, double ratio) {
    if (!valid_ratio(ratio)) throw InvalidArgument("ratio", "must be within [0, 1]");
    if (scores.shape != current.bits.shape) {
        throw ShapeError(current.layer_index, "scores " + shape_to_string(scores.shape) + " do not match mask " +
                                                  shape_to_string(current.bits.shape));
    }
    std::vector<std::size_t> kept;
    kept.reserve(current.total());
    for (std::size_t i = 0; i < current.total(); ++i) {
        if (current.bits[i]) kept.push_back(i);
    }
    const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(kept.size())));

    PruneMask next = current;
    if (count == 0) return next;
    auto less = [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
    };
    auto nth = kept.begin() + static_cast<std::ptrdiff_t>(count);
    if (nth != kept.end()) std::nth_element(kept.begin(), nth, kept.end(), less);
    for (auto it = kept.begin(); it != nth; ++it) next.bits[*it] = 0;
    return next;
}

MaskSet compute_step_masks(const Model& model, const MaskSet& masks, const PruneSettings& settings) {
    validate(settings, model);
    if (settings.algorithm == PruneAlgorithm::manual) {
        throw InvalidArgument("algorithm", "manual pruning is applied through mask edits");
    }
    MaskSet start = full_masks(model);
    for (const auto& [index, mask] : masks) start.at(index) = mask;
    check_congruent(model, start);

    MaskSet result;
    for (const auto& [index, mask] : start) {
        ScoreTensor scores;
        switch (settings.algorithm) {
            case PruneAlgorithm::map: scores = map_scores(model.layers[index].weight); break;
            case PruneAlgorithm::lap: scores = lap_scores(model, start, index, LapMode::both); break;
            case PruneAlgorithm::lap_forward: scores = lap_scores(model, start, index, LapMode::forward); break;
            case PruneAlgorithm::lap_backward: scores = lap_scores(model, start, index, LapMode::backward); break;
            case PruneAlgorithm::manual: break;
        }
        result.emplace(index, prune_by_ratio(scores, mask, settings.ratio_for(index)));
    }
    return result;
}

std::array<std::size_t, 2> MaskViewLayout::pixel(std::size_t flat) const {
    const auto [row, col] = cell(flat);
    const auto block_cells = block_height * block_width;
    const auto block = col / block_cells;
    const auto within = col % block_cells;
    return {row * row_pixel_height + within / block_width, block * block_width + within % block_width};
}

MaskViewLayout mask_view_layout(const Layer& layer) {
    if (!layer.weighted()) throw InvalidArgument("layer", "only dense and conv2d layers have a mask view");
    const auto& s = layer.weight.shape;
    MaskViewLayout layout;
    layout.rows = s[0];
    layout.cols = layer.weight.size() / s[0];
    if (layer.kind == LayerKind::conv2d) {
        layout.blocks_per_row = s[1];
        layout.block_height = s[2];
        layout.block_width = s[3];
        layout.row_pixel_height = s[2];
    } else {
        layout.block_width = s[1];
    }
    return layout;
}

std::string_view to_string(EditKind kind) {
    switch (kind) {
        case EditKind::prune_indices: return "prune_indices";
        case EditKind::restore_indices: return "restore_indices";
        case EditKind::prune_channel: return "prune_channel";
        case EditKind::restore_channel: return "restore_channel";
        case EditKind::prune_rect: return "prune_rect";
        case EditKind::restore_rect: return "restore_rect";
    }
    return "unknown";
}

std::optional<EditKind> parse_edit_kind(std::string_view name) {
    for (auto k : {EditKind::prune_indices, EditKind::restore_indices, EditKind::prune_channel,
                   EditKind::restore_channel, EditKind::prune_rect, EditKind::restore_rect}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

bool MaskEdit::prunes() const {
    return kind == EditKind::prune_indices || kind == EditKind::prune_channel || kind == EditKind::prune_rect;
}

MaskEdit MaskEdit::prune_channel(std::size_t layer, std::size_t channel) {
    return {.layer_index = layer, .kind = EditKind::prune_channel, .channel = channel};
}
MaskEdit MaskEdit::restore_channel(std::size_t layer, std::size_t channel) {
    return {.layer_index = layer, .kind = EditKind::restore_channel, .channel = channel};
}
MaskEdit MaskEdit::prune_indices(std::size_t layer, std::vector<std::size_t> indices) {
    return {.layer_index = layer, .kind = EditKind::prune_indices, .indices = std::move(indices)};
}
MaskEdit MaskEdit::restore_indices(std::size_t layer, std::vector<std::size_t> indices) {
    return {.layer_index = layer, .kind = EditKind::restore_indices, .indices = std::move(indices)};
}
MaskEdit MaskEdit::prune_rect(std::size_t layer, MaskRect rect) {
    return {.layer_index = layer, .kind = EditKind::prune_rect, .rect = rect};
}
MaskEdit MaskEdit::restore_rect(std::size_t layer, MaskRect rect) {
    return {.layer_index = layer, .kind = EditKind::restore_rect, .rect = rect};
}

std::vector<std::size_t> edit_cells(const Model& model, const MaskEdit& edit) {
    if (edit.layer_index >= model.layers.size() || !model.layers[edit.layer_index].weighted()) {
        throw InvalidArgument("layer_index", "layer " + std::to_string(edit.layer_index) + " has no weights");
    }
    const auto layout = mask_view_layout(model.layers[edit.layer_index]);
    std::vector<std::size_t> cells;
    switch (edit.kind) {
        case EditKind::prune_indices:
        case EditKind::restore_indices:
            for (auto i : edit.indices) {
                if (i >= layout.cell_count()) {
                    throw InvalidArgument("indices", "index " + std::to_string(i) + " out of range for " +
                                                         std::to_string(layout.cell_count()) + " weights");
                }
            }
            cells = edit.indices;
            break;
        case EditKind::prune_channel:
        case EditKind::restore_channel:
            if (edit.channel >= layout.rows) {
                throw InvalidArgument("channel", "channel " + std::to_string(edit.channel) + " out of range for " +
                                                     std::to_string(layout.rows) + " channels");
            }
            cells.resize(layout.cols);
            std::iota(cells.begin(), cells.end(), edit.channel * layout.cols);
            break;
        case EditKind::prune_rect:
        case EditKind::restore_rect: {
            const auto r0 = std::min(edit.rect.row0, edit.rect.row1), r1 = std::max(edit.rect.row0, edit.rect.row1);
            const auto c0 = std::min(edit.rect.col0, edit.rect.col1), c1 = std::max(edit.rect.col0, edit.rect.col1);
            if (r1 >= layout.rows || c1 >= layout.cols) {
                throw InvalidArgument("rect", "rectangle exceeds the " + std::to_string(layout.rows) + "x" +
                                                  std::to_string(layout.cols) + " mask view");
            }
            for (auto r = r0; r <= r1; ++r) {
                for (auto c = c0; c <= c1; ++c) cells.push_back(layout.flat_index(r, c));
            }
            break;
        }
    }
    return cells;
}

MaskSet apply_edits(const Model& model, const MaskSet& masks, std::span<const MaskEdit> edits) {
    std::vector<std::vector<std::size_t>> touched;
    touched.reserve(edits.size());
    for (const auto& edit : edits) touched.push_back(edit_cells(model, edit));

    MaskSet result = full_masks(model);
    for (const auto& [index, mask] : masks) result.at(index) = mask;
    for (std::size_t e = 0; e < edits.size(); ++e) {
        auto& bits = result.at(edits[e].layer_index).bits;
        const std::uint8_t value = edits[e].prunes() ? 0 : 1;
        for (auto i : touched[e]) bits[i] = value;
    }
    return result;
}

}  // namespace vinn
