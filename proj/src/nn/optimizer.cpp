#include "vrls/nn/optimizer.hpp"

#include <cmath>

namespace vrls::nn {

double learning_rate(std::int64_t epoch, double base, double decay, double power) {
    return base / (1.0 + decay * std::pow(static_cast<double>(epoch), power));
}

namespace {

void check(const ParameterSet& params, const ParameterSet& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("gradient layout does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].shape() != grads[i].shape()) throw std::invalid_argument("gradient shape mismatch");
    if (!all_finite(grads)) throw NonFiniteError("non-finite gradient");
}

}  // namespace

void apply_update(ParameterSet& params, const ParameterSet& grads, double step_size) {
    check(params, grads);
    add_into(params, grads, -step_size);
}

void Sgd::step(ParameterSet& params, const ParameterSet& grads, double step_size) {
    apply_update(params, grads, step_size);
}

void RmsProp::step(ParameterSet& params, const ParameterSet& grads, double step_size) {
    check(params, grads);
    if (square_avg_.empty()) square_avg_ = zeros_like(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& s = square_avg_[i];
        const auto& g = grads[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            s[k] = decay_ * s[k] + (1.0 - decay_) * g[k] * g[k];
            p[k] -= step_size * g[k] / (std::sqrt(s[k]) + epsilon_);
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind) {
    if (kind == "sgd") return std::make_unique<Sgd>();
    if (kind == "rmsprop") return std::make_unique<RmsProp>();
    throw std::invalid_argument("unknown optimizer '" + kind + "' (expected sgd | rmsprop)");
}

}  // namespace vrls::nn
