#include "vinn/metrics.hpp"

#include "vinn/error.hpp"
#include "vinn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vinn {

std::size_t Sparsity::pruned() const {
    return std::accumulate(layers.begin(), layers.end(), std::size_t{0},
                           [](std::size_t acc, const LayerSparsity& l) { return acc + l.pruned; });
}

std::size_t Sparsity::total() const {
    return std::accumulate(layers.begin(), layers.end(), std::size_t{0},
                           [](std::size_t acc, const LayerSparsity& l) { return acc + l.total; });
}

double Sparsity::global_ratio() const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(pruned()) / static_cast<double>(t);
}

Sparsity sparsity_of(const Model& model, const MaskSet& masks) {
    Sparsity s;
    for (auto index : weighted_layer_indices(model)) {
        const auto total = model.layers[index].weight.size();
        auto it = masks.find(index);
        s.layers.push_back({index, it == masks.end() ? 0 : it->second.pruned_count(), total});
    }
    return s;
}

std::size_t argmax(std::span<const float> scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

std::vector<double> softmax(std::span<const float> scores) {
    const double peak = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(static_cast<double>(scores[i]) - peak);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

namespace {

std::vector<PrPoint> pr_curve(const std::vector<double>& probs, std::span<const std::uint32_t> labels,
                              std::uint32_t cls) {
    const auto n = probs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });

    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), cls));
    // Threshold t selects every sample with p > t. Walking the ascending
    // order, everything past the current group is predicted positive.
    std::size_t tp = positives;
    std::size_t predicted = n;
    std::vector<PrPoint> curve;
    std::size_t k = 0;
    while (k < n) {
        const double t = probs[order[k]];
        while (k < n && probs[order[k]] == t) {
            if (labels[order[k]] == cls) --tp;
            --predicted;
            ++k;
        }
        PrPoint point;
        point.recall = positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(positives);
        point.precision = predicted == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(predicted);
        curve.push_back(point);
    }
    curve.push_back(PrPoint{0.0, 1.0});
    return curve;
}

}  // namespace

EvalReport evaluate_scores(std::span<const float> scores, std::span<const std::uint32_t> labels,
                           std::size_t num_classes) {
    const auto n = labels.size();
    if (n == 0) throw Error("cannot evaluate an empty dataset");
    if (num_classes == 0 || scores.size() != n * num_classes) {
        throw Error("score matrix has " + std::to_string(scores.size()) + " values for " + std::to_string(n) +
                    " samples of " + std::to_string(num_classes) + " classes");
    }

    EvalReport report;
    report.num_samples = n;
    report.confusion.assign(num_classes, std::vector<std::uint64_t>(num_classes, 0));
    std::vector<std::vector<double>> class_probs(num_classes, std::vector<double>(n));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto row = scores.subspan(s * num_classes, num_classes);
        const auto label = labels[s];
        if (label >= num_classes) throw Error("label " + std::to_string(label) + " out of range");
        const auto predicted = argmax(row);
        ++report.confusion[label][predicted];
        correct += predicted == label;
        const auto p = softmax(row);
        loss_sum += -std::log(std::max(p[label], 1e-12));
        for (std::size_t c = 0; c < num_classes; ++c) class_probs[c][s] = p[c];
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    report.mean_loss = loss_sum / static_cast<double>(n);
    for (std::size_t c = 0; c < num_classes; ++c) {
        report.pr_curves.push_back(pr_curve(class_probs[c], labels, static_cast<std::uint32_t>(c)));
    }
    return report;
}

EvalReport evaluate(const Model& model, const MaskSet& masks, const Dataset& dataset) {
    check_compatible(model, dataset);
    const MaskedNetwork network(model, masks);
    const auto classes = dataset.num_classes();
    std::vector<float> scores(dataset.size() * classes);
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        const auto out = network.forward(dataset.sample(s));
        std::copy(out.data.begin(), out.data.end(), scores.begin() + static_cast<std::ptrdiff_t>(s * classes));
    }
    auto report = evaluate_scores(scores, dataset.labels, classes);
    report.sparsity = sparsity_of(model, masks);
    return report;
}

ReportDelta compare_reports(const EvalReport& a, const EvalReport& b) {
    if (a.num_classes() != b.num_classes()) {
        throw InvalidArgument("reports", "class counts differ: " + std::to_string(a.num_classes()) + " vs " +
                                             std::to_string(b.num_classes()));
    }
    if (a.sparsity.layers.size() != b.sparsity.layers.size()) {
        throw InvalidArgument("reports", "reports cover different weighted layers");
    }
    ReportDelta d;
    d.accuracy = b.accuracy - a.accuracy;
    d.mean_loss = b.mean_loss - a.mean_loss;
    d.global_ratio = b.sparsity.global_ratio() - a.sparsity.global_ratio();
    for (std::size_t i = 0; i < a.sparsity.layers.size(); ++i) {
        const auto& la = a.sparsity.layers[i];
        const auto& lb = b.sparsity.layers[i];
        if (la.layer_index != lb.layer_index || la.total != lb.total) {
            throw InvalidArgument("reports", "reports cover different weighted layers");
        }
        d.layers.push_back({la.layer_index, static_cast<long long>(lb.pruned) - static_cast<long long>(la.pruned)});
    }
    return d;
}

}  // namespace vinn
