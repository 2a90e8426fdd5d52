#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "vrls/nn/tensor.hpp"

namespace vrls::nn {

/// Thrown when a gradient or update contains NaN/Inf.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Step size base / (1 + decay * epoch^power); defaults 1e-3, 0.01, 1.1.
double learning_rate(std::int64_t epoch, double base = 1e-3, double decay = 0.01, double power = 1.1);

/// Plain gradient descent: params -= step_size * grads.
void apply_update(ParameterSet& params, const ParameterSet& grads, double step_size);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual std::string kind() const = 0;
    /// Updates `params` in place; throws NonFiniteError before touching them
    /// if `grads` is not finite.
    virtual void step(ParameterSet& params, const ParameterSet& grads, double step_size) = 0;
    virtual ParameterSet state() const { return {}; }
    virtual void set_state(const ParameterSet&) {}
    virtual std::unique_ptr<Optimizer> clone() const = 0;
};

class Sgd final : public Optimizer {
public:
    std::string kind() const override { return "sgd"; }
    void step(ParameterSet& params, const ParameterSet& grads, double step_size) override;
    std::unique_ptr<Optimizer> clone() const override { return std::make_unique<Sgd>(*this); }
};

/// RMSProp with one running mean of squared gradients shared by every worker
/// that feeds this instance.
class RmsProp final : public Optimizer {
public:
    explicit RmsProp(double decay = 0.99, double epsilon = 1e-5) : decay_(decay), epsilon_(epsilon) {}

    std::string kind() const override { return "rmsprop"; }
    void step(ParameterSet& params, const ParameterSet& grads, double step_size) override;
    ParameterSet state() const override { return square_avg_; }
    void set_state(const ParameterSet& s) override { square_avg_ = s; }
    std::unique_ptr<Optimizer> clone() const override { return std::make_unique<RmsProp>(*this); }

private:
    double decay_;
    double epsilon_;
    ParameterSet square_avg_;
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind);

}  // namespace vrls::nn
