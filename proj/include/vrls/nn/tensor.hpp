#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vrls::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    Tensor reshaped(Shape shape) const;
    void fill(double v);
    bool all_finite() const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Ordered list of parameter tensors (or gradients with the same layout).
using ParameterSet = std::vector<Tensor>;

ParameterSet zeros_like(const ParameterSet& params);
void add_into(ParameterSet& acc, const ParameterSet& delta, double scale = 1.0);
void scale(ParameterSet& set, double factor);
bool all_finite(const ParameterSet& set);
std::size_t parameter_count(const ParameterSet& set);

}  // namespace vrls::nn
