#pragma once

#include "vinn/mask.hpp"
#include "vinn/model.hpp"
#include "vinn/rng.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vt {

namespace fs = std::filesystem;

fs::path fixture_dir();
fs::path golden_dir();

// Scoped scratch directory under the system temp dir.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "vinn");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& path);
nlohmann::json read_json(const fs::path& path);

// Plain scalar reference implementation in double precision. Written
// independently of the engine: no shared kernels, explicit index arithmetic.
namespace ref {

struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> v;
};

Array dense(const vinn::Layer& layer, const std::vector<double>& w, const Array& x);
Array conv(const vinn::Layer& layer, const std::vector<double>& w, const Array& x);
Array maxpool(std::size_t window, std::size_t stride, const Array& x);

// Output of every layer for one input, with masked weights taken as zero.
std::vector<Array> activations(const vinn::Model& model, const vinn::MaskSet& masks, std::span<const float> input);

struct Eval {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};
Eval evaluate(const vinn::Model& model, const vinn::MaskSet& masks, const vinn::Dataset& dataset);

}  // namespace ref

// Sort-based pruning oracle: order kept entries by (score, index) and zero
// the first floor(ratio * kept).
std::vector<std::uint8_t> prune_oracle(const std::vector<double>& scores, const std::vector<std::uint8_t>& mask,
                                       double ratio);

// Bit packing written out one bit at a time.
std::vector<std::uint8_t> pack_oracle(const std::vector<std::uint8_t>& bits);

// Random networks for property tests. Dense-only chains or small conv nets,
// weights uniform in [-1, 1].
vinn::Model random_dense_model(vinn::Xoshiro256& rng);
vinn::Model random_conv_model(vinn::Xoshiro256& rng);
vinn::Model random_model(vinn::Xoshiro256& rng);
vinn::MaskSet random_masks(const vinn::Model& model, vinn::Xoshiro256& rng, double keep_probability);
vinn::Tensor random_input(const vinn::Model& model, vinn::Xoshiro256& rng);

// Dataset with labels in [0, classes) and one random input per sample.
vinn::Dataset random_dataset(const vinn::Model& model, std::size_t n, vinn::Xoshiro256& rng);

// Model with every pruned weight explicitly set to 0.0f.
vinn::Model zeroed_model(const vinn::Model& model, const vinn::MaskSet& masks);

}  // namespace vt
