#pragma once

#include <memory>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "vrls/nn/tensor.hpp"

namespace vrls::nn {

enum class ActivationKind { Tanh, Softmax, Linear };

/// Declarative layer description. Convolutions use stride-aware "same" zero
/// padding with odd kernels; DENSE flattens its input; COLUMNS feeds every
/// column of a [rows, cols] input through its own copy of `branch` (each
/// column seen as a 1-channel sequence) and stacks the [filters, rows] results
/// into a [cols, rows, filters] map. SCALE multiplies the last axis by fixed,
/// untrained per-index factors.
struct LayerSpec {
    enum class Kind { Conv1D, Conv2D, Dense, Act, Columns, Scale };

    Kind kind = Kind::Dense;
    std::size_t filters = 0;
    std::size_t kernel = 0;    // conv1d length, conv2d height
    std::size_t kernel_w = 0;  // conv2d width
    std::size_t stride = 1;
    std::size_t units = 0;
    ActivationKind activation = ActivationKind::Linear;
    std::vector<LayerSpec> branch;
    std::vector<double> factors;

    static LayerSpec conv1d(std::size_t filters, std::size_t kernel, std::size_t stride = 1);
    static LayerSpec conv2d(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride = 1);
    static LayerSpec dense(std::size_t units);
    static LayerSpec act(ActivationKind a);
    static LayerSpec columns(std::vector<LayerSpec> branch);
    static LayerSpec scale(std::vector<double> factors);

    bool operator==(const LayerSpec&) const = default;
};

nlohmann::json to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);

/// Per-layer values saved by forward() for backward().
struct LayerCache {
    std::vector<Tensor> saved;
    std::vector<LayerCache> children;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual const Shape& output_shape() const = 0;
    virtual std::vector<Shape> parameter_shapes() const { return {}; }
    virtual void initialize(std::span<Tensor> params, std::mt19937_64& rng) const;
    virtual Tensor forward(const Tensor& in, std::span<const Tensor> params, LayerCache& cache) const = 0;
    /// Returns d(loss)/d(input) and accumulates d(loss)/d(params) into `grads`.
    virtual Tensor backward(const LayerCache& cache, const Tensor& grad_out, std::span<const Tensor> params,
                            std::span<Tensor> grads) const = 0;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input);

struct ForwardCache {
    std::vector<LayerCache> layers;
    bool valid = false;
};

/// Sequential network owning one flat parameter set.
class Network {
public:
    Network(Shape input, std::vector<LayerSpec> specs);
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    void initialize(std::mt19937_64& rng);

    Tensor forward(const Tensor& input) const;
    Tensor forward(const Tensor& input, ForwardCache& cache) const;
    /// Gradients of every parameter given d(loss)/d(output).
    ParameterSet backward(const ForwardCache& cache, const Tensor& grad_out) const;

    const ParameterSet& parameters() const { return params_; }
    ParameterSet& parameters() { return params_; }
    void set_parameters(const ParameterSet& params);

    const Shape& input_shape() const { return input_; }
    const Shape& output_shape() const;
    const std::vector<LayerSpec>& specs() const { return specs_; }
    nlohmann::json architecture() const;

private:
    void build();

    Shape input_;
    std::vector<LayerSpec> specs_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::size_t> offsets_;  // first parameter index per layer, plus end
    ParameterSet params_;
};

}  // namespace vrls::nn
