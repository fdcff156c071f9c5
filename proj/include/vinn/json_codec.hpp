#pragma once

#include "vinn/feature_maps.hpp"
#include "vinn/metrics.hpp"
#include "vinn/pruning.hpp"
#include "vinn/session.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace vinn {

using nlohmann::json;

// JSON shapes shared by the session archive, the HTTP API and CLI reports.
// Objects serialize with sorted keys, so equal values give equal bytes.

void to_json(json& j, const LayerSparsity& v);
void from_json(const json& j, LayerSparsity& v);
void to_json(json& j, const Sparsity& v);
void from_json(const json& j, Sparsity& v);
void to_json(json& j, const PrPoint& v);
void from_json(const json& j, PrPoint& v);
void to_json(json& j, const EvalReport& v);
void from_json(const json& j, EvalReport& v);
void to_json(json& j, const ReportDelta& v);
void to_json(json& j, const PruneSettings& v);
void to_json(json& j, const MaskEdit& v);
void to_json(json& j, const MaskViewLayout& v);
void to_json(json& j, const FeatureMapSet& v);

/// Strict parsers for client input; failures throw InvalidArgument naming
/// the field.
PruneSettings parse_settings(const json& j);
MaskEdit parse_edit(const json& j);
std::vector<MaskEdit> parse_edits(const json& j);

/// Step summary without masks (masks travel separately).
json step_summary(const PruneStep& step, bool is_current);

/// Layout plus per-channel row spans, as the mask endpoint reports it.
json layout_json(const MaskViewLayout& layout);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(const std::string& text);

/// Run-length encoding of a bit sequence as [[value, count], ...].
json rle_encode(std::span<const std::uint8_t> bits);

}  // namespace vinn
