#include "vrls/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace vrls::nn {

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != element_count(shape_))
        throw std::invalid_argument("tensor of shape " + to_string(shape_) + " given " + std::to_string(data_.size()) +
                                    " values");
}

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ParameterSet zeros_like(const ParameterSet& params) {
    ParameterSet out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.shape(), 0.0);
    return out;
}

void add_into(ParameterSet& acc, const ParameterSet& delta, double s) {
    if (acc.size() != delta.size()) throw std::invalid_argument("parameter set layouts differ");
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (acc[i].shape() != delta[i].shape()) throw std::invalid_argument("parameter shapes differ");
        for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i][k] += s * delta[i][k];
    }
}

void scale(ParameterSet& set, double factor) {
    for (auto& t : set)
        for (auto& v : t.values()) v *= factor;
}

bool all_finite(const ParameterSet& set) {
    return std::all_of(set.begin(), set.end(), [](const Tensor& t) { return t.all_finite(); });
}

std::size_t parameter_count(const ParameterSet& set) {
    std::size_t n = 0;
    for (const auto& t : set) n += t.size();
    return n;
}

}  // namespace vrls::nn
