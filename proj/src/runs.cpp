#include "vinn/runs.hpp"

#include "vinn/error.hpp"
#include "vinn/json_codec.hpp"

#include <cstdio>

namespace vinn {

std::string hash_hex(std::uint64_t hash) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

nlohmann::json run_prune_series(Session& session, const PruneSettings& settings, std::size_t steps) {
    validate(settings, session.model());
    auto entry = [](std::size_t index, const PruneStep& step) {
        return nlohmann::json{{"step", index}, {"mask_hash", hash_hex(mask_hash(step.masks))}, {"report", step.report}};
    };
    nlohmann::json entries = nlohmann::json::array();
    nlohmann::json trajectory = nlohmann::json::array();
    entries.push_back(entry(0, session.current()));
    trajectory.push_back(session.current().report.sparsity.global_ratio());
    for (std::size_t k = 1; k <= steps; ++k) {
        const auto& step = session.run_prune_step(settings);
        entries.push_back(entry(k, step));
        trajectory.push_back(step.report.sparsity.global_ratio());
    }
    return {{"model", session.model().name},
            {"dataset", session.dataset().name},
            {"settings", settings},
            {"steps_requested", steps},
            {"steps", std::move(entries)},
            {"sparsity_trajectory", std::move(trajectory)}};
}

std::string compare_csv(const std::vector<std::pair<std::string, nlohmann::json>>& reports) {
    std::string out = "algo,step,ratio,accuracy,loss\n";
    for (const auto& [algo, report] : reports) {
        for (const auto& step : report.at("steps")) {
            const auto& r = step.at("report");
            out += algo + "," + step.at("step").dump() + "," + r.at("sparsity").at("global_ratio").dump() + "," +
                   r.at("accuracy").dump() + "," + r.at("mean_loss").dump() + "\n";
        }
    }
    return out;
}

std::vector<std::uint8_t> mask_to_pgm(const PruneMask& mask, const MaskViewLayout& layout) {
    if (layout.cell_count() != mask.total()) throw Error("layout does not match mask size");
    const auto header = "P5\n" + std::to_string(layout.cols) + " " + std::to_string(layout.rows) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + mask.total());
    for (std::size_t r = 0; r < layout.rows; ++r) {
        for (std::size_t c = 0; c < layout.cols; ++c) {
            out.push_back(mask.bits[layout.flat_index(r, c)] ? 255 : 0);
        }
    }
    return out;
}

}  // namespace vinn
