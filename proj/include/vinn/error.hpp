#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vinn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not chain. Carries the index of the layer at fault.
class ShapeError : public Error {
public:
    ShapeError(std::size_t layer_index, const std::string& what)
        : Error("layer " + std::to_string(layer_index) + ": " + what), layer_index_(layer_index) {}

    std::size_t layer_index() const { return layer_index_; }

private:
    std::size_t layer_index_;
};

class ArchiveError : public Error {
public:
    using Error::Error;
};

/// Rejected user input; `field()` names the offending request field.
class InvalidArgument : public Error {
public:
    InvalidArgument(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class NotFound : public Error {
public:
    using Error::Error;
};

}  // namespace vinn
