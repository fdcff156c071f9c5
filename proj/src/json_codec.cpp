#include "vinn/json_codec.hpp"

#include "vinn/error.hpp"

#include <cstdio>

namespace vinn {

void to_json(json& j, const LayerSparsity& v) {
    j = json{{"layer_index", v.layer_index}, {"pruned", v.pruned}, {"total", v.total}};
}

void from_json(const json& j, LayerSparsity& v) {
    v.layer_index = j.at("layer_index").get<std::size_t>();
    v.pruned = j.at("pruned").get<std::size_t>();
    v.total = j.at("total").get<std::size_t>();
}

void to_json(json& j, const Sparsity& v) {
    j = json{{"layers", v.layers}, {"pruned", v.pruned()}, {"total", v.total()}, {"global_ratio", v.global_ratio()}};
}

void from_json(const json& j, Sparsity& v) { v.layers = j.at("layers").get<std::vector<LayerSparsity>>(); }

void to_json(json& j, const PrPoint& v) { j = json{{"recall", v.recall}, {"precision", v.precision}}; }

void from_json(const json& j, PrPoint& v) {
    v.recall = j.at("recall").get<double>();
    v.precision = j.at("precision").get<double>();
}

void to_json(json& j, const EvalReport& v) {
    j = json{{"num_samples", v.num_samples}, {"accuracy", v.accuracy}, {"mean_loss", v.mean_loss},
             {"confusion", v.confusion},     {"pr_curves", v.pr_curves}, {"sparsity", v.sparsity}};
}

void from_json(const json& j, EvalReport& v) {
    v.num_samples = j.at("num_samples").get<std::size_t>();
    v.accuracy = j.at("accuracy").get<double>();
    v.mean_loss = j.at("mean_loss").get<double>();
    v.confusion = j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>();
    v.pr_curves = j.at("pr_curves").get<std::vector<std::vector<PrPoint>>>();
    v.sparsity = j.at("sparsity").get<Sparsity>();
}

void to_json(json& j, const ReportDelta& v) {
    json layers = json::array();
    for (const auto& l : v.layers) layers.push_back({{"layer_index", l.layer_index}, {"pruned", l.pruned}});
    j = json{{"accuracy", v.accuracy}, {"mean_loss", v.mean_loss}, {"global_ratio", v.global_ratio},
             {"layers", std::move(layers)}};
}

void to_json(json& j, const PruneSettings& v) {
    json per_layer = json::object();
    for (const auto& [layer, ratio] : v.per_layer_ratio) per_layer[std::to_string(layer)] = ratio;
    j = json{{"algorithm", std::string(to_string(v.algorithm))},
             {"global_ratio", v.global_ratio},
             {"per_layer_ratio", std::move(per_layer)}};
}

void to_json(json& j, const MaskEdit& v) {
    j = json{{"layer_index", v.layer_index}, {"kind", std::string(to_string(v.kind))}};
    switch (v.kind) {
        case EditKind::prune_indices:
        case EditKind::restore_indices: j["indices"] = v.indices; break;
        case EditKind::prune_channel:
        case EditKind::restore_channel: j["channel"] = v.channel; break;
        case EditKind::prune_rect:
        case EditKind::restore_rect: j["rect"] = {v.rect.row0, v.rect.col0, v.rect.row1, v.rect.col1}; break;
    }
}

json layout_json(const MaskViewLayout& layout) {
    json spans = json::array();
    for (std::size_t r = 0; r < layout.rows; ++r) {
        spans.push_back({{"channel", r},
                         {"row", r},
                         {"pixel_row_start", r * layout.row_pixel_height},
                         {"pixel_row_end", (r + 1) * layout.row_pixel_height - 1}});
    }
    return json{{"rows", layout.rows},
                {"cols", layout.cols},
                {"blocks_per_row", layout.blocks_per_row},
                {"block_height", layout.block_height},
                {"block_width", layout.block_width},
                {"row_pixel_height", layout.row_pixel_height},
                {"pixel_rows", layout.rows * layout.row_pixel_height},
                {"pixel_cols", layout.blocks_per_row * layout.block_width},
                {"channel_row_spans", std::move(spans)}};
}

void to_json(json& j, const MaskViewLayout& v) { j = layout_json(v); }

void to_json(json& j, const FeatureMapSet& v) {
    json maps = json::array();
    for (const auto& m : v.maps) {
        maps.push_back({{"channel", m.channel},
                        {"height", m.height},
                        {"width", m.width},
                        {"values", m.values},
                        {"min", m.min},
                        {"max", m.max},
                        {"mean", m.mean},
                        {"is_dead", m.is_dead}});
    }
    j = json{{"sample_index", v.sample_index},
             {"layer_index", v.layer_index},
             {"source_layer", v.source_layer ? json(*v.source_layer) : json(nullptr)},
             {"maps", std::move(maps)}};
}

namespace {

std::size_t get_index(const json& j, const std::string& field) {
    if (!j.contains(field)) throw InvalidArgument(field, "is required");
    const auto& v = j.at(field);
    if (!v.is_number_unsigned()) throw InvalidArgument(field, "must be a non-negative integer");
    return v.get<std::size_t>();
}

double get_ratio(const json& v, const std::string& field) {
    if (!v.is_number()) throw InvalidArgument(field, "must be a number");
    const auto r = v.get<double>();
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument(field, "must be within [0, 1]");
    return r;
}

}  // namespace

PruneSettings parse_settings(const json& j) {
    if (!j.is_object()) throw InvalidArgument("settings", "must be an object");
    auto settings = PruneSettings::suggested();
    if (j.contains("algorithm")) {
        const auto& a = j.at("algorithm");
        if (!a.is_string()) throw InvalidArgument("algorithm", "must be a string");
        auto parsed = parse_algorithm(a.get<std::string>());
        if (!parsed) throw InvalidArgument("algorithm", "unknown algorithm '" + a.get<std::string>() + "'");
        settings.algorithm = *parsed;
    }
    if (j.contains("global_ratio")) settings.global_ratio = get_ratio(j.at("global_ratio"), "global_ratio");
    if (j.contains("per_layer_ratio")) {
        const auto& per = j.at("per_layer_ratio");
        if (!per.is_object()) throw InvalidArgument("per_layer_ratio", "must be an object of layer index to ratio");
        for (const auto& [key, value] : per.items()) {
            const auto field = "per_layer_ratio." + key;
            std::size_t layer = 0;
            std::size_t used = 0;
            try {
                layer = std::stoul(key, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != key.size() || key.front() == '-') {
                throw InvalidArgument(field, "key must be a layer index");
            }
            settings.per_layer_ratio[layer] = get_ratio(value, field);
        }
    }
    return settings;
}

MaskEdit parse_edit(const json& j) {
    if (!j.is_object()) throw InvalidArgument("edit", "must be an object");
    MaskEdit edit;
    edit.layer_index = get_index(j, "layer_index");
    if (!j.contains("kind") || !j.at("kind").is_string()) throw InvalidArgument("kind", "must be a string");
    auto kind = parse_edit_kind(j.at("kind").get<std::string>());
    if (!kind) throw InvalidArgument("kind", "unknown edit kind '" + j.at("kind").get<std::string>() + "'");
    edit.kind = *kind;
    switch (edit.kind) {
        case EditKind::prune_indices:
        case EditKind::restore_indices: {
            if (!j.contains("indices") || !j.at("indices").is_array()) {
                throw InvalidArgument("indices", "must be an array");
            }
            for (const auto& v : j.at("indices")) {
                if (!v.is_number_unsigned()) throw InvalidArgument("indices", "entries must be non-negative integers");
                edit.indices.push_back(v.get<std::size_t>());
            }
            break;
        }
        case EditKind::prune_channel:
        case EditKind::restore_channel: edit.channel = get_index(j, "channel"); break;
        case EditKind::prune_rect:
        case EditKind::restore_rect: {
            if (!j.contains("rect") || !j.at("rect").is_array() || j.at("rect").size() != 4) {
                throw InvalidArgument("rect", "must be [row0, col0, row1, col1]");
            }
            std::size_t v[4];
            for (std::size_t k = 0; k < 4; ++k) {
                const auto& e = j.at("rect")[k];
                if (!e.is_number_unsigned()) throw InvalidArgument("rect", "entries must be non-negative integers");
                v[k] = e.get<std::size_t>();
            }
            edit.rect = {v[0], v[1], v[2], v[3]};
            break;
        }
    }
    return edit;
}

std::vector<MaskEdit> parse_edits(const json& j) {
    if (!j.is_array()) throw InvalidArgument("edits", "must be an array");
    std::vector<MaskEdit> edits;
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            edits.push_back(parse_edit(j[i]));
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("edits[" + std::to_string(i) + "]." + e.field(),
                                  std::string(e.what()).substr(e.field().size() + 2));
        }
    }
    return edits;
}

json step_summary(const PruneStep& step, bool is_current) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(mask_hash(step.masks)));
    return json{{"step_id", step.step_id},
                {"parent_id", step.parent_id ? json(*step.parent_id) : json(nullptr)},
                {"settings", step.settings},
                {"manual_edits", step.manual_edits},
                {"report", step.report},
                {"created_at", step.created_at},
                {"mask_hash", hash},
                {"current", is_current}};
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& text) {
    if (text.size() % 2 != 0) throw Error("hex string has odd length");
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
        throw Error(std::string("invalid hex digit '") + c + "'");
    };
    std::vector<std::uint8_t> out(text.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>((nibble(text[2 * i]) << 4) | nibble(text[2 * i + 1]));
    }
    return out;
}

json rle_encode(std::span<const std::uint8_t> bits) {
    json runs = json::array();
    std::size_t i = 0;
    while (i < bits.size()) {
        std::size_t k = i;
        while (k < bits.size() && bits[k] == bits[i]) ++k;
        runs.push_back({bits[i], k - i});
        i = k;
    }
    return runs;
}

}  // namespace vinn
