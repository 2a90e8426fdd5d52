#include "vrls/agent/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vrls/nn/optimizer.hpp"

namespace vrls::agent {

using nlohmann::json;
using nn::ActivationKind;
using nn::LayerSpec;

json to_json(const Architecture& a) {
    return {{"column_filters", a.column_filters},
            {"column_kernel", a.column_kernel},
            {"merge_filters", a.merge_filters},
            {"merge_kernel", a.merge_kernel},
            {"head_scale", a.head_scale},
            {"count_gain", a.count_gain}};
}

Architecture architecture_from_json(const json& j) {
    Architecture a;
    a.column_filters = j.at("column_filters").get<std::size_t>();
    a.column_kernel = j.at("column_kernel").get<std::size_t>();
    a.merge_filters = j.at("merge_filters").get<std::size_t>();
    a.merge_kernel = j.at("merge_kernel").get<std::size_t>();
    a.head_scale = j.value("head_scale", 1.0);
    a.count_gain = j.value("count_gain", 1.0);
    return a;
}

namespace {

std::vector<LayerSpec> trunk(const Architecture& a) {
    return {LayerSpec::scale({a.count_gain, 1.0, a.count_gain, 1.0}),
            LayerSpec::columns({LayerSpec::conv1d(a.column_filters, a.column_kernel), LayerSpec::act(ActivationKind::Tanh)}),
            LayerSpec::conv2d(a.merge_filters, a.merge_kernel, a.merge_kernel),
            LayerSpec::act(ActivationKind::Tanh)};
}

nn::Shape input_shape(std::size_t n_tbs) { return {n_tbs, 4}; }

void scale_head(nn::Network& net, double factor) {
    auto params = net.parameters();
    // last dense layer: weights then bias
    for (auto& v : params.at(params.size() - 2).values()) v *= factor;
    net.set_parameters(params);
}

}  // namespace

std::vector<LayerSpec> actor_layers(std::size_t n_tbs, const Architecture& a) {
    auto layers = trunk(a);
    layers.push_back(LayerSpec::dense(n_tbs));
    layers.push_back(LayerSpec::act(ActivationKind::Softmax));
    return layers;
}

std::vector<LayerSpec> critic_layers(const Architecture& a) {
    auto layers = trunk(a);
    layers.push_back(LayerSpec::dense(1));
    return layers;
}

Policy::Policy(std::size_t n_tbs, Architecture arch)
    : actor(input_shape(n_tbs), actor_layers(n_tbs, arch)),
      critic(input_shape(n_tbs), critic_layers(arch)),
      n_tbs_(n_tbs),
      arch_(arch) {}

void Policy::initialize(std::mt19937_64& rng) {
    actor.initialize(rng);
    critic.initialize(rng);
    if (arch_.head_scale != 1.0) {
        scale_head(actor, arch_.head_scale);
        scale_head(critic, arch_.head_scale);
    }
}

std::vector<double> unshuffle(std::span<const double> shuffled_probs, std::span<const TbIndex> permutation) {
    if (shuffled_probs.size() != permutation.size()) throw std::invalid_argument("permutation length mismatch");
    std::vector<double> out(permutation.size());
    for (std::size_t row = 0; row < permutation.size(); ++row) out.at(permutation[row]) = shuffled_probs[row];
    return out;
}

std::vector<double> actor_probabilities(const Policy& policy, const nn::Tensor& presented) {
    const auto out = policy.actor.forward(presented);
    if (!out.all_finite()) throw nn::NonFiniteError("non-finite policy output");
    return {out.values().begin(), out.values().end()};
}

Decision act(const Policy& policy, const SchedulerState& state, const ResourcePool& pool, std::mt19937_64& rng,
             ActMode mode) {
    Decision d;
    d.presented = shuffle_state(state, pool, rng);
    d.shuffled_probs = actor_probabilities(policy, d.presented.matrix);
    const auto& p = d.shuffled_probs;
    if (mode == ActMode::Greedy) {
        d.row = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    } else {
        std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
        d.row = pick(rng);
    }
    d.tb = d.presented.permutation[d.row];
    return d;
}

}  // namespace vrls::agent
