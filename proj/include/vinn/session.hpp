#pragma once

#include "vinn/mask.hpp"
#include "vinn/metrics.hpp"
#include "vinn/model.hpp"
#include "vinn/pruning.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vinn {

using StepId = std::uint64_t;

/// One card of the pruning timeline.
struct PruneStep {
    StepId step_id = 0;
    std::optional<StepId> parent_id;
    PruneSettings settings;
    MaskSet masks;
    std::vector<MaskEdit> manual_edits;
    EvalReport report;
    std::int64_t created_at = 0;  // unix milliseconds

    bool operator==(const PruneStep&) const = default;
};

/// Pruning state for one model/dataset pair.
///
/// Steps form a tree rooted at the unpruned baseline (step 0). The current
/// step is the head new steps attach to; reverting moves the head, so the
/// next step starts a branch. Removing a step removes its descendants too.
///
/// Not synchronized: callers serialize mutations.
class Session {
public:
    using Clock = std::function<std::int64_t()>;

    Session(Model model, Dataset dataset, Clock clock = {});

    /// Rebuilds a session from stored steps; used by the archive loader.
    static Session restore(Model model, Dataset dataset, std::vector<PruneStep> steps, StepId current,
                           StepId next_id, Clock clock = {});

    const Model& model() const { return model_; }
    const Dataset& dataset() const { return dataset_; }

    std::string model_ref;    // where the model archive came from
    std::string dataset_ref;  // likewise for the dataset

    StepId current_id() const { return current_; }
    StepId next_id() const { return next_id_; }
    const PruneStep& current() const { return steps_.at(current_); }
    const PruneStep& step(StepId id) const;
    bool has_step(StepId id) const { return steps_.contains(id); }

    /// Steps in id order.
    std::vector<const PruneStep*> list_steps() const;

    const PruneStep& run_prune_step(const PruneSettings& settings);
    const PruneStep& apply_manual_edits(std::span<const MaskEdit> edits);
    void revert_to(StepId id);
    /// Removes `id` and its descendants. If the current step goes with them,
    /// the head moves to the removed step's parent.
    void remove_step(StepId id);

    /// Flips the pending mark on an output channel of a weighted layer and
    /// returns the edit that click stands for: prune_channel when the channel
    /// was not marked, restore_channel when it was. A channel counts as marked
    /// when it is fully pruned in the current masks, or when a click is
    /// pending on it.
    MaskEdit toggle_channel_mark(std::size_t layer_index, std::size_t channel);
    std::vector<MaskEdit> pending_marks() const;

private:
    struct Restoring {};
    Session(Model model, Dataset dataset, Clock clock, Restoring);

    const PruneStep& append(PruneSettings settings, MaskSet masks, std::vector<MaskEdit> edits);
    std::int64_t now() const;

    Model model_;
    Dataset dataset_;
    Clock clock_;
    std::map<StepId, PruneStep> steps_;
    StepId current_ = 0;
    StepId next_id_ = 1;
    std::map<std::pair<std::size_t, std::size_t>, MaskEdit> pending_;
};

}  // namespace vinn
