#pragma once

#include "vinn/mask.hpp"
#include "vinn/model.hpp"
#include "vinn/tensor.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace vinn {

enum class PruneAlgorithm { map, lap, lap_forward, lap_backward, manual };

std::string_view to_string(PruneAlgorithm algorithm);
/// Accepts both "lap_forward" and "lap-forward" spellings.
std::optional<PruneAlgorithm> parse_algorithm(std::string_view name);

struct PruneSettings {
    PruneAlgorithm algorithm = PruneAlgorithm::lap;
    double global_ratio = 0.5;
    std::map<std::size_t, double> per_layer_ratio;  // overrides global_ratio

    /// Suggested starting point shown to users; not a tuned value.
    static PruneSettings suggested() { return {}; }

    double ratio_for(std::size_t layer_index) const;

    bool operator==(const PruneSettings&) const = default;
};

/// Throws InvalidArgument for ratios outside [0, 1] or per-layer keys that
/// are not weighted layers of `model`.
void validate(const PruneSettings& settings, const Model& model);

/// |w| for every weight.
ScoreTensor map_scores(const Tensor& weight);

enum class LapMode { both, forward, backward };

/// Look-ahead score |w| * prev_norm * next_norm.
///
/// prev_norm(j) is the Euclidean norm of the masked weights in the nearest
/// preceding weighted layer that produce input unit (or channel) j of this
/// layer; next_norm(i) is the norm of the masked weights in the nearest
/// following weighted layer that consume output unit (or channel) i. For conv
/// layers the norms run over whole channel slices; a dense layer after a
/// flatten reaches a conv channel through all of its flat positions. A missing
/// neighbour, or one excluded by `mode`, contributes a factor of 1.
ScoreTensor lap_scores(const Model& model, const MaskSet& masks, std::size_t layer_index, LapMode mode);

/// Prunes floor(ratio * kept) more entries: the smallest scores among the
/// currently kept ones, ties going to the lower flat index. Never restores.
PruneMask prune_by_ratio(const ScoreTensor& scores, const PruneMask& current, double ratio);

/// One algorithmic pruning step over every weighted layer. LAP scores are
/// computed against `masks` as given, not updated layer by layer.
MaskSet compute_step_masks(const Model& model, const MaskSet& masks, const PruneSettings& settings);

/// Geometry of the 2-D mask view of one weighted layer.
///
/// Each row is one output channel (conv) or output unit (dense). Within a
/// conv row the in_ch kernels sit left to right, each kernel's kh*kw cells in
/// row-major order, so cell (row, col) is flat index row * cols + col. For
/// rendering, a conv row is `row_pixel_height` (= kh) pixels tall and holds
/// `blocks_per_row` kernel blocks of kh x kw pixels.
struct MaskViewLayout {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t blocks_per_row = 1;
    std::size_t block_height = 1;
    std::size_t block_width = 0;
    std::size_t row_pixel_height = 1;

    std::size_t cell_count() const { return rows * cols; }
    std::size_t flat_index(std::size_t row, std::size_t col) const { return row * cols + col; }
    std::array<std::size_t, 2> cell(std::size_t flat) const { return {flat / cols, flat % cols}; }
    /// Top-left render pixel of a cell, as (y, x).
    std::array<std::size_t, 2> pixel(std::size_t flat) const;

    bool operator==(const MaskViewLayout&) const = default;
};

MaskViewLayout mask_view_layout(const Layer& layer);

struct MaskRect {
    std::size_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // inclusive corners

    bool operator==(const MaskRect&) const = default;
};

enum class EditKind { prune_indices, restore_indices, prune_channel, restore_channel, prune_rect, restore_rect };

std::string_view to_string(EditKind kind);
std::optional<EditKind> parse_edit_kind(std::string_view name);

struct MaskEdit {
    std::size_t layer_index = 0;
    EditKind kind = EditKind::prune_indices;
    std::vector<std::size_t> indices;  // *_indices
    std::size_t channel = 0;           // *_channel
    MaskRect rect;                     // *_rect, in mask-view cells

    bool prunes() const;

    static MaskEdit prune_channel(std::size_t layer, std::size_t channel);
    static MaskEdit restore_channel(std::size_t layer, std::size_t channel);
    static MaskEdit prune_indices(std::size_t layer, std::vector<std::size_t> indices);
    static MaskEdit restore_indices(std::size_t layer, std::vector<std::size_t> indices);
    static MaskEdit prune_rect(std::size_t layer, MaskRect rect);
    static MaskEdit restore_rect(std::size_t layer, MaskRect rect);

    bool operator==(const MaskEdit&) const = default;
};

/// Flat indices an edit touches. Throws InvalidArgument when out of bounds.
std::vector<std::size_t> edit_cells(const Model& model, const MaskEdit& edit);

/// Applies edits in order to a copy of `masks`. Every edit is validated
/// before any is applied, so a bad edit rejects the whole batch.
MaskSet apply_edits(const Model& model, const MaskSet& masks, std::span<const MaskEdit> edits);

}  // namespace vinn
