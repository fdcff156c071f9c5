#pragma once

#include "vinn/model.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace vinn::fixtures {

inline constexpr std::uint64_t default_seed = 7;

inline constexpr const char* mlp_name = "blob-mlp";
inline constexpr const char* cnn_name = "shapes-cnn";
inline constexpr const char* blobs_train_name = "blobs-train";
inline constexpr const char* blobs_test_name = "blobs-test";
inline constexpr const char* shapes_train_name = "shapes-train";
inline constexpr const char* shapes_test_name = "shapes-test";

// Layer indices of the fixture CNN:
// conv(4, 3x3, pad 1), relu, maxpool 2, conv(8, 3x3, pad 1), relu, flatten, dense 4.
inline constexpr std::size_t cnn_second_conv = 3;
inline constexpr std::size_t cnn_second_conv_relu = 4;

inline constexpr double min_test_accuracy = 0.90;
inline constexpr double contrast_ratio = 0.7;
inline constexpr std::size_t activity_samples = 50;

/// Four Gaussian blobs in 16 dimensions; 100 train and 50 test samples per class.
std::pair<Dataset, Dataset> make_blob_datasets(std::uint64_t seed);

/// 8x8 images: horizontal bar, vertical bar, diagonal, blank. Noise on all.
/// 100 train and 50 test samples per class.
std::pair<Dataset, Dataset> make_shapes_datasets(std::uint64_t seed);

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 1500;
};

/// Full-batch gradient descent on softmax cross-entropy for the trailing
/// dense/relu layers of `model`, starting at `first_layer`. `features` holds
/// the input of `first_layer` for every sample. Returns the final training loss.
double train_dense_tail(Model& model, std::size_t first_layer, const std::vector<std::vector<double>>& features,
                        const std::vector<std::uint32_t>& labels, const TrainConfig& config);

/// 16-32-32-4 MLP trained on the blob data.
Model build_mlp(const Dataset& train, std::uint64_t seed);

/// The fixture CNN: hand-set, frozen edge-detecting conv kernels and a trained dense head.
Model build_cnn(const Dataset& train, std::uint64_t seed);

/// Writes models/, datasets/ and goldens.json under `out_dir` and returns the
/// goldens. Throws Error when a model misses `min_test_accuracy`.
nlohmann::json generate_fixtures(const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace vinn::fixtures
