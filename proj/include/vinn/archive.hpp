#pragma once

#include "vinn/model.hpp"
#include "vinn/session.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vinn {

namespace fs = std::filesystem;

// On-disk layout, all little-endian:
//
//   models/<name>/model.json     name, input_shape, layers; each tensor is
//                                {shape, offset, length} in bytes into
//   models/<name>/weights.bin    raw float32, tensors back to back in
//                                manifest order (weight before bias)
//   datasets/<name>/data.json    name, shape [N, ...], num_classes, class_names
//   datasets/<name>/samples.bin  float32 [N, ...]
//   datasets/<name>/labels.bin   uint8 [N]
//   sessions/<id>/session.json   steps with settings, edits, reports and
//                                masks as hex of packed bits (see pack_bits)

void save_model(const Model& model, const fs::path& dir);
/// Validates the manifest against the blob and the layer shape chain.
Model load_model(const fs::path& dir);

void save_dataset(const Dataset& dataset, const fs::path& dir);
Dataset load_dataset(const fs::path& dir);

nlohmann::json session_to_json(const Session& session);
Session session_from_json(const nlohmann::json& j, Model model, Dataset dataset);

/// Writes dir/session.json (through a temporary file and rename).
void save_session(const Session& session, const fs::path& dir);
/// Loads the model and dataset from the refs recorded in the archive.
Session load_session(const fs::path& dir);
Session load_session(const fs::path& dir, Model model, Dataset dataset);

struct ArchiveEntry {
    std::string name;
    fs::path path;
    bool valid = false;
    std::string reason;       // why an invalid archive was rejected
    nlohmann::json summary;   // manifest summary for valid archives
};

/// Every subdirectory of `root`, sorted by name. Missing root gives an empty list.
std::vector<ArchiveEntry> list_models(const fs::path& root);
std::vector<ArchiveEntry> list_datasets(const fs::path& root);

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);

}  // namespace vinn
