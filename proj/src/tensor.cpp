#include "vinn/tensor.hpp"

#include "vinn/error.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace vinn {

std::size_t shape_numel(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(std::span<const std::size_t> shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_numel(shape) != data.size()) {
        throw Error("tensor of shape " + shape_to_string(shape) + " given " + std::to_string(data.size()) +
                    " values");
    }
}

template struct BasicTensor<float>;
template struct BasicTensor<double>;
template struct BasicTensor<std::uint8_t>;

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

bool all_finite(const Tensor& t) {
    for (float v : t.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace vinn
