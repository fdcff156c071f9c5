#include "vinn/session.hpp"

#include "vinn/error.hpp"

#include <algorithm>
#include <chrono>

namespace vinn {

namespace {
std::int64_t system_millis() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}
}  // namespace

Session::Session(Model model, Dataset dataset, Clock clock)
    : model_(std::move(model)), dataset_(std::move(dataset)), clock_(std::move(clock)) {
    check_compatible(model_, dataset_);
    PruneStep baseline;
    baseline.step_id = 0;
    baseline.settings.global_ratio = 0.0;
    baseline.settings.algorithm = PruneAlgorithm::manual;
    baseline.masks = full_masks(model_);
    baseline.report = evaluate(model_, baseline.masks, dataset_);
    baseline.created_at = now();
    steps_.emplace(0, std::move(baseline));
}

Session::Session(Model model, Dataset dataset, Clock clock, Restoring)
    : model_(std::move(model)), dataset_(std::move(dataset)), clock_(std::move(clock)) {}

Session Session::restore(Model model, Dataset dataset, std::vector<PruneStep> steps, StepId current, StepId next_id,
                         Clock clock) {
    check_compatible(model, dataset);
    Session s(std::move(model), std::move(dataset), std::move(clock), Restoring{});
    for (auto& step : steps) {
        if (step.step_id >= next_id) throw Error("step id " + std::to_string(step.step_id) + " is not below next id");
        if (step.parent_id && !s.steps_.contains(*step.parent_id)) {
            throw Error("step " + std::to_string(step.step_id) + " references unknown parent");
        }
        check_congruent(s.model_, step.masks);
        s.steps_.emplace(step.step_id, std::move(step));
    }
    if (!s.steps_.contains(0)) throw Error("session has no baseline step");
    if (!s.steps_.contains(current)) throw Error("current step " + std::to_string(current) + " does not exist");
    s.current_ = current;
    s.next_id_ = next_id;
    return s;
}

std::int64_t Session::now() const { return clock_ ? clock_() : system_millis(); }

const PruneStep& Session::step(StepId id) const {
    auto it = steps_.find(id);
    if (it == steps_.end()) throw NotFound("unknown step " + std::to_string(id));
    return it->second;
}

std::vector<const PruneStep*> Session::list_steps() const {
    std::vector<const PruneStep*> out;
    out.reserve(steps_.size());
    for (const auto& [id, step] : steps_) out.push_back(&step);
    return out;
}

const PruneStep& Session::append(PruneSettings settings, MaskSet masks, std::vector<MaskEdit> edits) {
    PruneStep step;
    step.step_id = next_id_;
    step.parent_id = current_;
    step.settings = std::move(settings);
    step.report = evaluate(model_, masks, dataset_);
    step.masks = std::move(masks);
    step.manual_edits = std::move(edits);
    step.created_at = now();

    const auto id = next_id_++;
    steps_.emplace(id, std::move(step));
    current_ = id;
    pending_.clear();
    return steps_.at(id);
}

const PruneStep& Session::run_prune_step(const PruneSettings& settings) {
    auto masks = compute_step_masks(model_, current().masks, settings);
    return append(settings, std::move(masks), {});
}

const PruneStep& Session::apply_manual_edits(std::span<const MaskEdit> edits) {
    auto masks = apply_edits(model_, current().masks, edits);
    PruneSettings settings;
    settings.algorithm = PruneAlgorithm::manual;
    settings.global_ratio = 0.0;
    return append(std::move(settings), std::move(masks), std::vector<MaskEdit>(edits.begin(), edits.end()));
}

void Session::revert_to(StepId id) {
    step(id);
    current_ = id;
    pending_.clear();
}

void Session::remove_step(StepId id) {
    step(id);
    if (id == 0) throw InvalidArgument("step_id", "the baseline step cannot be removed");

    // Ids grow along every branch, so one ascending pass finds all descendants.
    std::vector<StepId> doomed{id};
    for (const auto& [sid, s] : steps_) {
        if (sid > id && s.parent_id && std::find(doomed.begin(), doomed.end(), *s.parent_id) != doomed.end()) {
            doomed.push_back(sid);
        }
    }
    const auto parent = *steps_.at(id).parent_id;
    const bool lost_head = std::find(doomed.begin(), doomed.end(), current_) != doomed.end();
    for (auto sid : doomed) steps_.erase(sid);
    if (lost_head) {
        current_ = parent;
        pending_.clear();
    }
}

MaskEdit Session::toggle_channel_mark(std::size_t layer_index, std::size_t channel) {
    auto probe = MaskEdit::prune_channel(layer_index, channel);
    edit_cells(model_, probe);  // bounds check

    const auto key = std::make_pair(layer_index, channel);
    auto it = pending_.find(key);
    if (it != pending_.end()) {
        // Second click undoes the pending one.
        auto undo = it->second.kind == EditKind::prune_channel ? MaskEdit::restore_channel(layer_index, channel)
                                                               : MaskEdit::prune_channel(layer_index, channel);
        pending_.erase(it);
        return undo;
    }
    const bool pruned = channel_fully_pruned(current().masks.at(layer_index), channel);
    auto edit = pruned ? MaskEdit::restore_channel(layer_index, channel) : probe;
    pending_.emplace(key, edit);
    return edit;
}

std::vector<MaskEdit> Session::pending_marks() const {
    std::vector<MaskEdit> out;
    for (const auto& [key, edit] : pending_) out.push_back(edit);
    return out;
}

}  // namespace vinn
