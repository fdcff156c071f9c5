#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vinn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(std::span<const std::size_t> shape);
std::string shape_to_string(std::span<const std::size_t> shape);

/// Dense row-major n-d array. The last index varies fastest.
template <typename T>
struct BasicTensor {
    Shape shape;
    std::vector<T> data;

    BasicTensor() = default;

    explicit BasicTensor(Shape s, T fill = T{})
        : shape(std::move(s)), data(shape_numel(shape), fill) {}

    BasicTensor(Shape s, std::vector<T> values);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    std::span<T> values() { return data; }
    std::span<const T> values() const { return data; }

    bool operator==(const BasicTensor&) const = default;
};

using Tensor = BasicTensor<float>;
using ScoreTensor = BasicTensor<double>;
using MaskBits = BasicTensor<std::uint8_t>;

// Compares the raw float bit patterns, so 0.0f and -0.0f differ.
bool bit_equal(const Tensor& a, const Tensor& b);

bool all_finite(const Tensor& t);

}  // namespace vinn
