#include "vinn/fixtures.hpp"

#include "vinn/archive.hpp"
#include "vinn/error.hpp"
#include "vinn/feature_maps.hpp"
#include "vinn/inference.hpp"
#include "vinn/json_codec.hpp"
#include "vinn/metrics.hpp"
#include "vinn/pruning.hpp"
#include "vinn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vinn::fixtures {

namespace {

// Independent stream per purpose so adding draws to one never shifts another.
Xoshiro256 stream(std::uint64_t seed, std::uint64_t tag) { return Xoshiro256(seed ^ (tag * 0x9e3779b97f4a7c15ull)); }

enum : std::uint64_t { tag_blobs = 1, tag_shapes = 2, tag_mlp_init = 3, tag_cnn_init = 4 };

constexpr std::size_t train_per_class = 100;
constexpr std::size_t test_per_class = 50;

// Builds train and test sets from a per-class sample generator, then shuffles each.
template <typename Gen>
std::pair<Dataset, Dataset> balanced_split(const std::string& prefix, Shape sample_shape,
                                           std::vector<std::string> class_names, Xoshiro256& rng, Gen&& gen) {
    const auto classes = class_names.size();
    const auto per = shape_numel(sample_shape);
    auto build = [&](std::size_t per_class, const std::string& name) {
        std::vector<std::uint32_t> labels;
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::uint32_t c = 0; c < classes; ++c) labels.push_back(c);
        }
        rng.shuffle(std::span(labels));
        Shape shape{labels.size()};
        shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
        Dataset d;
        d.name = name;
        d.class_names = class_names;
        d.samples = Tensor(shape);
        for (std::size_t s = 0; s < labels.size(); ++s) {
            const auto values = gen(labels[s]);
            std::copy(values.begin(), values.end(), d.samples.data.begin() + static_cast<std::ptrdiff_t>(s * per));
        }
        d.labels = std::move(labels);
        return d;
    };
    auto train = build(train_per_class, prefix + "-train");
    auto test = build(test_per_class, prefix + "-test");
    return {std::move(train), std::move(test)};
}

}  // namespace

std::pair<Dataset, Dataset> make_blob_datasets(std::uint64_t seed) {
    constexpr std::size_t dims = 16;
    constexpr std::size_t classes = 4;
    constexpr double center_scale = 0.9;
    auto rng = stream(seed, tag_blobs);
    std::vector<std::vector<double>> centers(classes, std::vector<double>(dims));
    for (auto& c : centers) {
        for (auto& v : c) v = center_scale * rng.normal();
    }
    return balanced_split("blobs", {dims}, {"blob-a", "blob-b", "blob-c", "blob-d"}, rng, [&](std::uint32_t label) {
        std::vector<float> x(dims);
        for (std::size_t d = 0; d < dims; ++d) x[d] = static_cast<float>(centers[label][d] + rng.normal());
        return x;
    });
}

std::pair<Dataset, Dataset> make_shapes_datasets(std::uint64_t seed) {
    constexpr std::size_t side = 8;
    constexpr double noise = 0.1;
    auto rng = stream(seed, tag_shapes);
    return balanced_split(
        "shapes", {1, side, side}, {"horizontal", "vertical", "diagonal", "blank"}, rng, [&](std::uint32_t label) {
            std::vector<float> img(side * side);
            std::vector<double> px(side * side);
            for (auto& v : px) v = noise * rng.normal();
            const double intensity = rng.uniform(0.7, 1.0);
            if (label == 0 || label == 1) {
                const auto line = 1 + rng.below(side - 2);
                const auto length = 5 + rng.below(4);
                const auto start = rng.below(side - length + 1);
                for (std::size_t k = start; k < start + length; ++k) {
                    const auto idx = label == 0 ? line * side + k : k * side + line;
                    px[idx] += intensity;
                }
            } else if (label == 2) {
                const auto offset = static_cast<long>(rng.below(5)) - 2;
                for (long r = 0; r < static_cast<long>(side); ++r) {
                    const long c = r + offset;
                    if (c >= 0 && c < static_cast<long>(side)) px[static_cast<std::size_t>(r) * side + c] += intensity;
                }
            }
            for (std::size_t i = 0; i < px.size(); ++i) img[i] = static_cast<float>(px[i]);
            return img;
        });
}

double train_dense_tail(Model& model, std::size_t first_layer, const std::vector<std::vector<double>>& features,
                        const std::vector<std::uint32_t>& labels, const TrainConfig& config) {
    struct Params {
        std::size_t layer;
        std::size_t out, in;
        std::vector<double> w, b, gw, gb;
    };
    std::vector<Params> params;
    for (auto i = first_layer; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        if (l.kind == LayerKind::relu) continue;
        if (l.kind != LayerKind::dense) throw Error("train_dense_tail supports dense and relu layers only");
        Params p{i, l.weight.shape[0], l.weight.shape[1], {}, {}, {}, {}};
        p.w.assign(l.weight.data.begin(), l.weight.data.end());
        p.b.assign(l.bias.data.begin(), l.bias.data.end());
        p.gw.assign(p.w.size(), 0.0);
        p.gb.assign(p.b.size(), 0.0);
        params.push_back(std::move(p));
    }
    const auto n = features.size();
    double loss = 0.0;
    std::vector<std::vector<double>> acts;  // input of each dense layer
    std::vector<std::vector<double>> pre;   // dense outputs before relu
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (auto& p : params) {
            std::fill(p.gw.begin(), p.gw.end(), 0.0);
            std::fill(p.gb.begin(), p.gb.end(), 0.0);
        }
        loss = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            acts.clear();
            pre.clear();
            std::vector<double> a = features[s];
            for (std::size_t k = 0; k < params.size(); ++k) {
                const auto& p = params[k];
                acts.push_back(a);
                std::vector<double> z(p.out);
                for (std::size_t o = 0; o < p.out; ++o) {
                    double acc = p.b[o];
                    for (std::size_t i = 0; i < p.in; ++i) acc += p.w[o * p.in + i] * a[i];
                    z[o] = acc;
                }
                pre.push_back(z);
                if (k + 1 < params.size()) {
                    for (auto& v : z) v = std::max(v, 0.0);
                }
                a = std::move(z);
            }
            const double peak = *std::max_element(a.begin(), a.end());
            double sum = 0.0;
            for (auto& v : a) sum += (v = std::exp(v - peak));
            for (auto& v : a) v /= sum;
            loss -= std::log(std::max(a[labels[s]], 1e-12));

            std::vector<double> g = a;
            g[labels[s]] -= 1.0;
            for (std::size_t k = params.size(); k-- > 0;) {
                auto& p = params[k];
                if (k + 1 < params.size()) {
                    for (std::size_t o = 0; o < p.out; ++o) {
                        if (pre[k][o] <= 0.0) g[o] = 0.0;
                    }
                }
                std::vector<double> g_in(p.in, 0.0);
                for (std::size_t o = 0; o < p.out; ++o) {
                    p.gb[o] += g[o];
                    for (std::size_t i = 0; i < p.in; ++i) {
                        p.gw[o * p.in + i] += g[o] * acts[k][i];
                        g_in[i] += p.w[o * p.in + i] * g[o];
                    }
                }
                g = std::move(g_in);
            }
        }
        const double step = config.learning_rate / static_cast<double>(n);
        for (auto& p : params) {
            for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] -= step * p.gw[i];
            for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] -= step * p.gb[i];
        }
    }
    for (const auto& p : params) {
        auto& l = model.layers[p.layer];
        std::transform(p.w.begin(), p.w.end(), l.weight.data.begin(), [](double v) { return static_cast<float>(v); });
        std::transform(p.b.begin(), p.b.end(), l.bias.data.begin(), [](double v) { return static_cast<float>(v); });
    }
    return loss / static_cast<double>(n);
}

namespace {

std::vector<std::vector<double>> to_features(const Dataset& d) {
    std::vector<std::vector<double>> out;
    for (std::size_t s = 0; s < d.size(); ++s) {
        auto x = d.sample(s);
        out.emplace_back(x.begin(), x.end());
    }
    return out;
}

Tensor he_normal(Shape shape, std::size_t fan_in, Xoshiro256& rng) {
    Tensor t(std::move(shape));
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<float>(scale * rng.normal());
    return t;
}

}  // namespace

Model build_mlp(const Dataset& train, std::uint64_t seed) {
    auto rng = stream(seed, tag_mlp_init);
    Model m;
    m.name = mlp_name;
    m.input_shape = {16};
    m.layers = {Layer::dense(he_normal({32, 16}, 16, rng), Tensor({32})), Layer::relu(),
                Layer::dense(he_normal({32, 32}, 32, rng), Tensor({32})), Layer::relu(),
                Layer::dense(he_normal({4, 32}, 32, rng), Tensor({4}))};
    train_dense_tail(m, 0, to_features(train), train.labels, {.learning_rate = 0.05, .epochs = 1500});
    return m;
}

namespace {

// 3x3 line templates: 1 on the line, `off` elsewhere.
std::vector<float> line_kernel(int orientation, float on, float off) {
    std::vector<float> k(9, off);
    for (int i = 0; i < 3; ++i) {
        switch (orientation) {
            case 0: k[3 + i] = on; break;          // horizontal
            case 1: k[i * 3 + 1] = on; break;      // vertical
            case 2: k[i * 3 + i] = on; break;      // main diagonal
            case 3: k[i * 3 + 2 - i] = on; break;  // anti-diagonal
        }
    }
    return k;
}

Tensor first_conv_kernels() {
    std::vector<float> w;
    for (int o = 0; o < 4; ++o) {
        auto k = line_kernel(o, 1.0f, -0.5f);
        w.insert(w.end(), k.begin(), k.end());
    }
    return Tensor({4, 1, 3, 3}, std::move(w));
}

// Out-channels 0-3 continue one line orientation and are inhibited by the
// others, 4 sums all edge energy, 5 detects crossings, 6 is purely
// inhibitory (never fires after the relu) and 7 picks up line centres.
Tensor second_conv_kernels() {
    std::vector<float> w;
    auto put = [&w](const std::vector<float>& k) { w.insert(w.end(), k.begin(), k.end()); };
    for (int o = 0; o < 4; ++o) {
        for (int in = 0; in < 4; ++in) put(in == o ? line_kernel(o, 1.0f, -0.25f) : std::vector<float>(9, -0.25f));
    }
    for (int in = 0; in < 4; ++in) put(std::vector<float>(9, 0.5f));
    for (int in = 0; in < 4; ++in) put(in < 2 ? line_kernel(in, 1.0f, -0.25f) : std::vector<float>(9, -0.25f));
    for (int in = 0; in < 4; ++in) {
        auto k = std::vector<float>(9, -0.5f);
        k[4] = -1.5f;
        put(k);
    }
    for (int in = 0; in < 4; ++in) {
        auto k = std::vector<float>(9, -0.3f);
        k[4] = 1.0f;
        put(k);
    }
    return Tensor({8, 4, 3, 3}, std::move(w));
}

}  // namespace

Model build_cnn(const Dataset& train, std::uint64_t seed) {
    auto rng = stream(seed, tag_cnn_init);
    Model m;
    m.name = cnn_name;
    m.input_shape = {1, 8, 8};
    Tensor head({4, 128});
    for (auto& v : head.data) v = static_cast<float>(0.01 * rng.normal());
    m.layers = {Layer::conv2d(first_conv_kernels(), Tensor({4}), 1, 1),
                Layer::relu(),
                Layer::maxpool2d(2, 2),
                Layer::conv2d(second_conv_kernels(), Tensor({8}), 1, 1),
                Layer::relu(),
                Layer::flatten(),
                Layer::dense(std::move(head), Tensor({4}))};

    constexpr std::size_t flatten_index = 5;
    const MaskedNetwork network(m, {});
    std::vector<std::vector<double>> features;
    for (std::size_t s = 0; s < train.size(); ++s) {
        const auto acts = network.activations(train.sample(s));
        features.emplace_back(acts[flatten_index].data.begin(), acts[flatten_index].data.end());
    }
    train_dense_tail(m, flatten_index + 1, features, train.labels, {.learning_rate = 0.1, .epochs = 800});
    return m;
}

namespace {

void require_accuracy(const Model& model, const Dataset& test) {
    const auto report = evaluate(model, {}, test);
    if (report.accuracy < min_test_accuracy) {
        throw Error("fixture model '" + model.name + "' reached test accuracy " + std::to_string(report.accuracy) +
                    ", below the required " + std::to_string(min_test_accuracy));
    }
}

std::vector<std::size_t> full_rows(const PruneMask& mask) {
    std::vector<std::size_t> rows;
    for (std::size_t c = 0; c < mask.bits.shape[0]; ++c) {
        if (channel_fully_pruned(mask, c)) rows.push_back(c);
    }
    return rows;
}

}  // namespace

nlohmann::json generate_fixtures(const std::filesystem::path& out_dir, std::uint64_t seed) {
    auto [blobs_train, blobs_test] = make_blob_datasets(seed);
    auto [shapes_train, shapes_test] = make_shapes_datasets(seed);
    const auto mlp = build_mlp(blobs_train, seed);
    const auto cnn = build_cnn(shapes_train, seed);
    require_accuracy(mlp, blobs_test);
    require_accuracy(cnn, shapes_test);

    save_model(mlp, out_dir / "models" / mlp_name);
    save_model(cnn, out_dir / "models" / cnn_name);
    save_dataset(blobs_train, out_dir / "datasets" / blobs_train_name);
    save_dataset(blobs_test, out_dir / "datasets" / blobs_test_name);
    save_dataset(shapes_train, out_dir / "datasets" / shapes_train_name);
    save_dataset(shapes_test, out_dir / "datasets" / shapes_test_name);

    nlohmann::json goldens;
    goldens["seed"] = seed;

    {
        const auto baseline = evaluate(mlp, {}, blobs_test);
        PruneSettings map_half{PruneAlgorithm::map, 0.5, {}};
        const auto masks = compute_step_masks(mlp, full_masks(mlp), map_half);
        const auto pruned = evaluate(mlp, masks, blobs_test);
        goldens["mlp"] = {{"model", mlp_name},
                          {"dataset", blobs_test_name},
                          {"baseline_accuracy", baseline.accuracy},
                          {"baseline_loss", baseline.mean_loss},
                          {"map_half_accuracy", pruned.accuracy},
                          {"map_half_loss", pruned.mean_loss},
                          {"map_half_sparsity", pruned.sparsity}};
    }
    {
        const auto baseline = evaluate(cnn, {}, shapes_test);
        const auto activity = channel_activity(cnn, {}, shapes_test, cnn_second_conv_relu, activity_samples);
        const auto flagged = low_activity_channels(activity);
        std::vector<MaskEdit> edits;
        for (auto c : flagged) edits.push_back(MaskEdit::prune_channel(cnn_second_conv, c));
        const auto eliminated = evaluate(cnn, apply_edits(cnn, full_masks(cnn), edits), shapes_test);
        nlohmann::json mean_abs = nlohmann::json::array();
        for (const auto& a : activity) mean_abs.push_back(a.mean_abs);

        const auto lap = compute_step_masks(cnn, full_masks(cnn), {PruneAlgorithm::lap, contrast_ratio, {}});
        const auto map = compute_step_masks(cnn, full_masks(cnn), {PruneAlgorithm::map, contrast_ratio, {}});
        goldens["cnn"] = {{"model", cnn_name},
                          {"dataset", shapes_test_name},
                          {"baseline_accuracy", baseline.accuracy},
                          {"baseline_loss", baseline.mean_loss},
                          {"activity_layer", cnn_second_conv_relu},
                          {"activity_samples", activity_samples},
                          {"channel_mean_abs", mean_abs},
                          {"eliminated_layer", cnn_second_conv},
                          {"eliminated_channels", flagged},
                          {"eliminated_accuracy", eliminated.accuracy},
                          {"contrast_layer", cnn_second_conv},
                          {"contrast_ratio", contrast_ratio},
                          {"lap_full_rows", full_rows(lap.at(cnn_second_conv))},
                          {"map_full_rows", full_rows(map.at(cnn_second_conv))}};
    }
    const auto text = goldens.dump(2) + "\n";
    write_file(out_dir / "goldens.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return goldens;
}

}  // namespace vinn::fixtures
