#pragma once

#include "vinn/mask.hpp"
#include "vinn/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vinn {

struct LayerSparsity {
    std::size_t layer_index = 0;
    std::size_t pruned = 0;
    std::size_t total = 0;

    bool operator==(const LayerSparsity&) const = default;
};

struct Sparsity {
    std::vector<LayerSparsity> layers;

    std::size_t pruned() const;
    std::size_t total() const;
    double global_ratio() const;

    bool operator==(const Sparsity&) const = default;
};

Sparsity sparsity_of(const Model& model, const MaskSet& masks);

struct PrPoint {
    double recall = 0.0;
    double precision = 1.0;

    bool operator==(const PrPoint&) const = default;
};

struct EvalReport {
    std::size_t num_samples = 0;
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
    std::vector<std::vector<PrPoint>> pr_curves;        // one curve per class
    Sparsity sparsity;

    std::size_t num_classes() const { return confusion.size(); }

    bool operator==(const EvalReport&) const = default;
};

/// Lowest index wins ties.
std::size_t argmax(std::span<const float> scores);

/// Numerically stable softmax, computed in double.
std::vector<double> softmax(std::span<const float> scores);

/// Metrics from precomputed scores: `scores` is row-major [N, num_classes].
/// Loss is mean cross-entropy with probabilities floored at 1e-12. Each PR
/// curve sweeps one-vs-rest thresholds over the class's sorted unique
/// probabilities (ascending, so recall never increases along the curve) and
/// ends with (recall 0, precision 1). Precision with no predicted positives
/// is 1; recall for a class with no samples is 0.
EvalReport evaluate_scores(std::span<const float> scores, std::span<const std::uint32_t> labels,
                           std::size_t num_classes);

EvalReport evaluate(const Model& model, const MaskSet& masks, const Dataset& dataset);

struct LayerDelta {
    std::size_t layer_index = 0;
    long long pruned = 0;

    bool operator==(const LayerDelta&) const = default;
};

struct ReportDelta {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    double global_ratio = 0.0;
    std::vector<LayerDelta> layers;

    bool operator==(const ReportDelta&) const = default;
};

/// b - a for every quantity. Throws on class-count or layer-set mismatch.
ReportDelta compare_reports(const EvalReport& a, const EvalReport& b);

}  // namespace vinn
