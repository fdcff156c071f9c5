#pragma once

#include "vinn/mask.hpp"
#include "vinn/pruning.hpp"
#include "vinn/session.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vinn {

/// Runs `steps` iterative pruning steps on `session` and describes the run:
/// the baseline plus one entry per step with its EvalReport and mask hash,
/// and the global sparsity after each. Contains no timestamps, so equal
/// inputs give byte-identical reports.
nlohmann::json run_prune_series(Session& session, const PruneSettings& settings, std::size_t steps);

/// CSV with header `algo,step,ratio,accuracy,loss`, one line per step of each
/// report in the given order. `ratio` is the global pruning ratio after the step.
std::string compare_csv(const std::vector<std::pair<std::string, nlohmann::json>>& reports);

/// Binary PGM (P5): width = layout cols, height = layout rows, one byte per
/// mask cell, 255 kept and 0 pruned.
std::vector<std::uint8_t> mask_to_pgm(const PruneMask& mask, const MaskViewLayout& layout);

std::string hash_hex(std::uint64_t hash);

}  // namespace vinn
