#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unistd.h>

namespace vt {

using vinn::Layer;
using vinn::LayerKind;
using vinn::Model;
using vinn::Tensor;
using vinn::Xoshiro256;

fs::path fixture_dir() { return VINN_FIXTURE_DIR; }
fs::path golden_dir() { return VINN_GOLDEN_DIR; }

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

namespace ref {

namespace {

std::vector<double> masked_weights(const Model& model, const vinn::MaskSet& masks, std::size_t index) {
    const auto& w = model.layers[index].weight;
    std::vector<double> out(w.data.begin(), w.data.end());
    if (auto it = masks.find(index); it != masks.end()) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (it->second.bits.data[i] == 0) out[i] = 0.0;
        }
    }
    return out;
}

}  // namespace

Array dense(const Layer& layer, const std::vector<double>& w, const Array& x) {
    const auto out = layer.weight.shape[0];
    const auto in = layer.weight.shape[1];
    Array y{{out}, std::vector<double>(out)};
    for (std::size_t i = 0; i < out; ++i) {
        double acc = layer.bias.data[i];
        for (std::size_t j = 0; j < in; ++j) acc += w[i * in + j] * x.v[j];
        y.v[i] = acc;
    }
    return y;
}

Array conv(const Layer& layer, const std::vector<double>& w, const Array& x) {
    const auto oc = layer.weight.shape[0], ic = layer.weight.shape[1];
    const auto kh = layer.weight.shape[2], kw = layer.weight.shape[3];
    const auto h = x.shape[1], wd = x.shape[2];
    const long pad = static_cast<long>(layer.padding);
    const auto s = layer.stride;
    const auto oh = (h + 2 * layer.padding - kh) / s + 1;
    const auto ow = (wd + 2 * layer.padding - kw) / s + 1;
    Array y{{oc, oh, ow}, std::vector<double>(oc * oh * ow)};
    for (std::size_t o = 0; o < oc; ++o) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double acc = layer.bias.data[o];
                for (std::size_t i = 0; i < ic; ++i) {
                    for (std::size_t dy = 0; dy < kh; ++dy) {
                        for (std::size_t dx = 0; dx < kw; ++dx) {
                            const long yy = static_cast<long>(r * s + dy) - pad;
                            const long xx = static_cast<long>(c * s + dx) - pad;
                            if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                            acc += w[((o * ic + i) * kh + dy) * kw + dx] * x.v[(i * h + yy) * wd + xx];
                        }
                    }
                }
                y.v[(o * oh + r) * ow + c] = acc;
            }
        }
    }
    return y;
}

Array maxpool(std::size_t window, std::size_t stride, const Array& x) {
    const auto ch = x.shape[0], h = x.shape[1], wd = x.shape[2];
    const auto oh = (h - window) / stride + 1;
    const auto ow = (wd - window) / stride + 1;
    Array y{{ch, oh, ow}, std::vector<double>(ch * oh * ow)};
    for (std::size_t k = 0; k < ch; ++k) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double best = -INFINITY;
                for (std::size_t dy = 0; dy < window; ++dy) {
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        best = std::max(best, x.v[(k * h + r * stride + dy) * wd + c * stride + dx]);
                    }
                }
                y.v[(k * oh + r) * ow + c] = best;
            }
        }
    }
    return y;
}

std::vector<Array> activations(const Model& model, const vinn::MaskSet& masks, std::span<const float> input) {
    Array x{model.input_shape, std::vector<double>(input.begin(), input.end())};
    std::vector<Array> out;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        switch (layer.kind) {
            case LayerKind::dense: x = dense(layer, masked_weights(model, masks, l), x); break;
            case LayerKind::conv2d: x = conv(layer, masked_weights(model, masks, l), x); break;
            case LayerKind::relu:
                for (auto& v : x.v) v = v > 0.0 ? v : 0.0;
                break;
            case LayerKind::maxpool2d: x = maxpool(layer.window, layer.stride, x); break;
            case LayerKind::flatten: x.shape = {x.v.size()}; break;
        }
        out.push_back(x);
    }
    return out;
}

Eval evaluate(const Model& model, const vinn::MaskSet& masks, const vinn::Dataset& dataset) {
    Eval e;
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t n = 0; n < dataset.size(); ++n) {
        const auto scores = activations(model, masks, dataset.sample(n)).back().v;
        std::size_t best = 0;
        for (std::size_t k = 1; k < scores.size(); ++k) {
            if (scores[k] > scores[best]) best = k;
        }
        if (best == dataset.labels[n]) ++correct;
        const double m = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (double s : scores) z += std::exp(s - m);
        const double p = std::exp(scores[dataset.labels[n]] - m) / z;
        loss += -std::log(std::max(p, 1e-12));
    }
    e.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    e.mean_loss = loss / static_cast<double>(dataset.size());
    return e;
}

}  // namespace ref

std::vector<std::uint8_t> prune_oracle(const std::vector<double>& scores, const std::vector<std::uint8_t>& mask,
                                       double ratio) {
    std::vector<std::pair<double, std::size_t>> kept;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (mask[i]) kept.emplace_back(scores[i], i);
    }
    std::sort(kept.begin(), kept.end());
    const auto n = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(kept.size())));
    auto out = mask;
    for (std::size_t k = 0; k < n; ++k) out[kept[k].second] = 0;
    return out;
}

std::vector<std::uint8_t> pack_oracle(const std::vector<std::uint8_t>& bits) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (i % 8 == 0) out.push_back(0);
        if (bits[i]) out.back() = static_cast<std::uint8_t>(out.back() + (1u << (i % 8)));
    }
    return out;
}

namespace {

Tensor random_tensor(vinn::Shape shape, Xoshiro256& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

std::size_t between(Xoshiro256& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

}  // namespace

Model random_dense_model(Xoshiro256& rng) {
    Model m;
    m.name = "random-dense";
    std::size_t width = between(rng, 1, 12);
    m.input_shape = {width};
    const auto depth = between(rng, 1, 4);
    for (std::size_t d = 0; d < depth; ++d) {
        const auto out = between(rng, 2, 12);
        m.layers.push_back(Layer::dense(random_tensor({out, width}, rng), random_tensor({out}, rng)));
        if (d + 1 < depth) m.layers.push_back(Layer::relu());
        width = out;
    }
    return m;
}

Model random_conv_model(Xoshiro256& rng) {
    Model m;
    m.name = "random-conv";
    std::size_t ch = between(rng, 1, 3), h = between(rng, 4, 9), w = between(rng, 4, 9);
    m.input_shape = {ch, h, w};
    const auto convs = between(rng, 1, 2);
    for (std::size_t c = 0; c < convs; ++c) {
        const auto k = between(rng, 1, std::min<std::size_t>(3, std::min(h, w)));
        const auto pad = rng.below(2);
        const auto stride = between(rng, 1, 2);
        const auto out = between(rng, 1, 4);
        m.layers.push_back(Layer::conv2d(random_tensor({out, ch, k, k}, rng), random_tensor({out}, rng), stride, pad));
        h = (h + 2 * pad - k) / stride + 1;
        w = (w + 2 * pad - k) / stride + 1;
        ch = out;
        m.layers.push_back(Layer::relu());
        if (h >= 2 && w >= 2 && rng.below(2) == 0) {
            m.layers.push_back(Layer::maxpool2d(2, 2));
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
    }
    m.layers.push_back(Layer::flatten());
    const auto classes = between(rng, 2, 5);
    m.layers.push_back(Layer::dense(random_tensor({classes, ch * h * w}, rng), random_tensor({classes}, rng)));
    return m;
}

Model random_model(Xoshiro256& rng) { return rng.below(2) == 0 ? random_dense_model(rng) : random_conv_model(rng); }

vinn::MaskSet random_masks(const Model& model, Xoshiro256& rng, double keep_probability) {
    auto masks = vinn::full_masks(model);
    for (auto& [index, mask] : masks) {
        for (auto& b : mask.bits.data) b = rng.uniform() < keep_probability ? 1 : 0;
    }
    return masks;
}

Tensor random_input(const Model& model, Xoshiro256& rng) { return random_tensor(model.input_shape, rng); }

vinn::Dataset random_dataset(const Model& model, std::size_t n, Xoshiro256& rng) {
    vinn::Dataset d;
    d.name = "random";
    const auto classes = vinn::num_classes(model);
    for (std::size_t k = 0; k < classes; ++k) d.class_names.push_back("c" + std::to_string(k));
    vinn::Shape shape{n};
    shape.insert(shape.end(), model.input_shape.begin(), model.input_shape.end());
    d.samples = random_tensor(shape, rng);
    for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<std::uint32_t>(rng.below(classes)));
    return d;
}

Model zeroed_model(const Model& model, const vinn::MaskSet& masks) {
    auto out = model;
    for (const auto& [index, mask] : masks) {
        auto& w = out.layers[index].weight.data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!mask.bits.data[i]) w[i] = 0.0f;
        }
    }
    return out;
}

}  // namespace vt
