#include "vinn/archive.hpp"

#include "vinn/error.hpp"
#include "vinn/json_codec.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

namespace vinn {

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArchiveError("cannot write " + path.string());
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(path.string() + ": malformed JSON: " + e.what());
    }
}

void append_f32(std::vector<std::uint8_t>& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(bits >> shift));
}

float read_f32(const std::uint8_t* p) {
    const std::uint32_t bits = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                               std::uint32_t{p[3]} << 24;
    return std::bit_cast<float>(bits);
}

Shape shape_field(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ArchiveError(what + ": shape must be an array");
    Shape s;
    for (const auto& d : j) {
        if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
            throw ArchiveError(what + ": shape entries must be positive integers");
        }
        s.push_back(d.get<std::size_t>());
    }
    return s;
}

std::size_t uint_field(const nlohmann::json& j, const char* key, const std::string& what) {
    if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
        throw ArchiveError(what + ": '" + key + "' must be a non-negative integer");
    }
    return j.at(key).get<std::size_t>();
}

}  // namespace

void save_model(const Model& model, const fs::path& dir) {
    infer_shapes(model);
    fs::create_directories(dir);
    std::vector<std::uint8_t> blob;
    auto tensor_entry = [&blob](const Tensor& t) {
        nlohmann::json e{{"shape", t.shape}, {"offset", blob.size()}, {"length", t.size() * 4}};
        for (float v : t.data) append_f32(blob, v);
        return e;
    };
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        nlohmann::json l{{"kind", std::string(to_string(layer.kind))}};
        switch (layer.kind) {
            case LayerKind::conv2d:
                l["stride"] = layer.stride;
                l["padding"] = layer.padding;
                [[fallthrough]];
            case LayerKind::dense:
                l["weight"] = tensor_entry(layer.weight);
                l["bias"] = tensor_entry(layer.bias);
                break;
            case LayerKind::maxpool2d:
                l["window"] = layer.window;
                l["stride"] = layer.stride;
                break;
            case LayerKind::relu:
            case LayerKind::flatten: break;
        }
        layers.push_back(std::move(l));
    }
    nlohmann::json manifest{{"name", model.name}, {"input_shape", model.input_shape}, {"layers", std::move(layers)}};
    write_file(dir / "weights.bin", blob);
    write_text(dir / "model.json", manifest.dump(2) + "\n");
}

Model load_model(const fs::path& dir) {
    const auto manifest = read_json(dir / "model.json");
    const auto blob = read_file(dir / "weights.bin");
    const auto where = (dir / "model.json").string();
    if (!manifest.is_object() || !manifest.contains("layers") || !manifest.at("layers").is_array()) {
        throw ArchiveError(where + ": manifest must be an object with a 'layers' array");
    }

    Model model;
    model.name = manifest.value("name", std::string{});
    model.input_shape = shape_field(manifest.value("input_shape", nlohmann::json()), where + ": input_shape");

    std::size_t cursor = 0;
    auto read_tensor = [&](const nlohmann::json& entry, const std::string& what) {
        if (!entry.is_object()) throw ArchiveError(what + ": missing tensor entry");
        Tensor t(shape_field(entry.value("shape", nlohmann::json()), what));
        const auto offset = uint_field(entry, "offset", what);
        const auto length = uint_field(entry, "length", what);
        if (length != t.size() * 4) {
            throw ArchiveError(what + ": length " + std::to_string(length) + " does not match shape " +
                               shape_to_string(t.shape) + " (" + std::to_string(t.size() * 4) + " bytes)");
        }
        if (offset != cursor) {
            throw ArchiveError(what + ": offset " + std::to_string(offset) + " expected " + std::to_string(cursor) +
                               " (tensors must be contiguous and ascending)");
        }
        if (offset + length > blob.size()) {
            throw ArchiveError(what + ": length mismatch, bytes [" + std::to_string(offset) + ", " +
                               std::to_string(offset + length) + ") exceed weights.bin size " +
                               std::to_string(blob.size()));
        }
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = read_f32(blob.data() + offset + 4 * i);
        cursor = offset + length;
        return t;
    };

    const auto& layers = manifest.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const auto what = where + ": layer " + std::to_string(i);
        const auto kind_name = l.is_object() ? l.value("kind", std::string{}) : std::string{};
        const auto kind = parse_layer_kind(kind_name);
        if (!kind) throw ArchiveError(what + ": unknown layer kind '" + kind_name + "'");
        Layer layer;
        layer.kind = *kind;
        switch (*kind) {
            case LayerKind::conv2d:
                layer.stride = uint_field(l, "stride", what);
                layer.padding = uint_field(l, "padding", what);
                [[fallthrough]];
            case LayerKind::dense:
                layer.weight = read_tensor(l.value("weight", nlohmann::json()), what + " weight");
                layer.bias = read_tensor(l.value("bias", nlohmann::json()), what + " bias");
                break;
            case LayerKind::maxpool2d:
                layer.window = uint_field(l, "window", what);
                layer.stride = uint_field(l, "stride", what);
                break;
            case LayerKind::relu:
            case LayerKind::flatten: break;
        }
        model.layers.push_back(std::move(layer));
    }
    if (cursor != blob.size()) {
        throw ArchiveError(where + ": weights.bin has " + std::to_string(blob.size() - cursor) +
                           " bytes not covered by the manifest");
    }
    try {
        infer_shapes(model);
    } catch (const ShapeError& e) {
        throw ArchiveError(where + ": " + e.what());
    }
    return model;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
    validate(dataset);
    if (dataset.num_classes() > 256) throw ArchiveError("datasets are limited to 256 classes");
    fs::create_directories(dir);
    std::vector<std::uint8_t> samples;
    samples.reserve(dataset.samples.size() * 4);
    for (float v : dataset.samples.data) append_f32(samples, v);
    std::vector<std::uint8_t> labels(dataset.labels.begin(), dataset.labels.end());
    nlohmann::json manifest{{"name", dataset.name},
                            {"shape", dataset.samples.shape},
                            {"num_classes", dataset.num_classes()},
                            {"class_names", dataset.class_names}};
    write_file(dir / "samples.bin", samples);
    write_file(dir / "labels.bin", labels);
    write_text(dir / "data.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
    const auto manifest = read_json(dir / "data.json");
    const auto where = (dir / "data.json").string();
    if (!manifest.is_object()) throw ArchiveError(where + ": manifest must be an object");
    Dataset d;
    d.name = manifest.value("name", std::string{});
    const auto shape = shape_field(manifest.value("shape", nlohmann::json()), where + ": shape");
    if (shape.size() < 2) throw ArchiveError(where + ": shape must be [N, ...sample shape]");
    const auto classes = uint_field(manifest, "num_classes", where);
    if (!manifest.contains("class_names") || !manifest.at("class_names").is_array()) {
        throw ArchiveError(where + ": class_names must be an array");
    }
    d.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    if (d.class_names.size() != classes) {
        throw ArchiveError(where + ": " + std::to_string(d.class_names.size()) + " class names for " +
                           std::to_string(classes) + " classes");
    }

    const auto samples = read_file(dir / "samples.bin");
    const auto labels = read_file(dir / "labels.bin");
    const auto count = shape_numel(shape);
    if (samples.size() != count * 4) {
        throw ArchiveError(where + ": samples.bin has " + std::to_string(samples.size()) + " bytes, shape " +
                           shape_to_string(shape) + " needs " + std::to_string(count * 4));
    }
    if (labels.size() != shape[0]) {
        throw ArchiveError(where + ": labels.bin has " + std::to_string(labels.size()) + " bytes, expected " +
                           std::to_string(shape[0]));
    }
    d.samples = Tensor(shape);
    for (std::size_t i = 0; i < count; ++i) d.samples[i] = read_f32(samples.data() + 4 * i);
    d.labels.assign(labels.begin(), labels.end());
    try {
        validate(d);
    } catch (const Error& e) {
        throw ArchiveError(where + ": " + e.what());
    }
    return d;
}

nlohmann::json session_to_json(const Session& session) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto* step : session.list_steps()) {
        nlohmann::json masks = nlohmann::json::array();
        for (const auto& [index, mask] : step->masks) {
            masks.push_back({{"layer_index", index},
                             {"shape", mask.bits.shape},
                             {"bits", to_hex(pack_bits(mask.bits.data))}});
        }
        steps.push_back({{"step_id", step->step_id},
                         {"parent_id", step->parent_id ? nlohmann::json(*step->parent_id) : nlohmann::json(nullptr)},
                         {"settings", step->settings},
                         {"manual_edits", step->manual_edits},
                         {"report", step->report},
                         {"created_at", step->created_at},
                         {"masks", std::move(masks)}});
    }
    return {{"model", session.model_ref},
            {"dataset", session.dataset_ref},
            {"current_step", session.current_id()},
            {"next_step_id", session.next_id()},
            {"steps", std::move(steps)}};
}

Session session_from_json(const nlohmann::json& j, Model model, Dataset dataset) {
    try {
        std::vector<PruneStep> steps;
        for (const auto& s : j.at("steps")) {
            PruneStep step;
            step.step_id = s.at("step_id").get<StepId>();
            if (!s.at("parent_id").is_null()) step.parent_id = s.at("parent_id").get<StepId>();
            step.settings = parse_settings(s.at("settings"));
            step.manual_edits = parse_edits(s.at("manual_edits"));
            step.report = s.at("report").get<EvalReport>();
            step.created_at = s.at("created_at").get<std::int64_t>();
            for (const auto& m : s.at("masks")) {
                PruneMask mask;
                mask.layer_index = m.at("layer_index").get<std::size_t>();
                const auto shape = m.at("shape").get<Shape>();
                mask.bits = MaskBits(shape, unpack_bits(from_hex(m.at("bits").get<std::string>()), shape_numel(shape)));
                step.masks.emplace(mask.layer_index, std::move(mask));
            }
            steps.push_back(std::move(step));
        }
        auto session = Session::restore(std::move(model), std::move(dataset), std::move(steps),
                                        j.at("current_step").get<StepId>(), j.at("next_step_id").get<StepId>());
        session.model_ref = j.at("model").get<std::string>();
        session.dataset_ref = j.at("dataset").get<std::string>();
        return session;
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(std::string("malformed session: ") + e.what());
    } catch (const ArchiveError&) {
        throw;
    } catch (const Error& e) {
        throw ArchiveError(std::string("invalid session: ") + e.what());
    }
}

void save_session(const Session& session, const fs::path& dir) {
    fs::create_directories(dir);
    const auto tmp = dir / "session.json.tmp";
    write_text(tmp, session_to_json(session).dump() + "\n");
    fs::rename(tmp, dir / "session.json");
}

Session load_session(const fs::path& dir) {
    const auto j = read_json(dir / "session.json");
    if (!j.is_object() || !j.contains("model") || !j.contains("dataset")) {
        throw ArchiveError((dir / "session.json").string() + ": missing model/dataset refs");
    }
    return session_from_json(j, load_model(j.at("model").get<std::string>()),
                             load_dataset(j.at("dataset").get<std::string>()));
}

Session load_session(const fs::path& dir, Model model, Dataset dataset) {
    return session_from_json(read_json(dir / "session.json"), std::move(model), std::move(dataset));
}

namespace {

template <typename Loader, typename Summarize>
std::vector<ArchiveEntry> list_archives(const fs::path& root, Loader load, Summarize summarize) {
    std::vector<ArchiveEntry> entries;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return entries;
    for (const auto& item : fs::directory_iterator(root)) {
        if (!item.is_directory()) continue;
        ArchiveEntry entry;
        entry.name = item.path().filename().string();
        entry.path = item.path();
        try {
            entry.summary = summarize(load(item.path()));
            entry.valid = true;
        } catch (const std::exception& e) {
            entry.reason = e.what();
        }
        entries.push_back(std::move(entry));
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return entries;
}

}  // namespace

std::vector<ArchiveEntry> list_models(const fs::path& root) {
    return list_archives(root, load_model, [](const Model& m) {
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& l : m.layers) layers.push_back(std::string(to_string(l.kind)));
        return nlohmann::json{{"model_name", m.name},
                              {"input_shape", m.input_shape},
                              {"layers", std::move(layers)},
                              {"weighted_layers", weighted_layer_indices(m)},
                              {"num_classes", num_classes(m)}};
    });
}

std::vector<ArchiveEntry> list_datasets(const fs::path& root) {
    return list_archives(root, load_dataset, [](const Dataset& d) {
        return nlohmann::json{{"dataset_name", d.name},
                              {"shape", d.samples.shape},
                              {"num_classes", d.num_classes()},
                              {"class_names", d.class_names}};
    });
}

}  // namespace vinn
