#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "vrls/agent/state.hpp"
#include "vrls/nn/network.hpp"

namespace vrls::agent {

struct Architecture {
    std::size_t column_filters = 16;
    std::size_t column_kernel = 3;
    std::size_t merge_filters = 16;
    std::size_t merge_kernel = 3;
    /// Glorot weights of the output layers are multiplied by this after
    /// initialization; small values start the actor near uniform.
    double head_scale = 0.01;
    /// Fixed gain on the two count columns ahead of the trunk. A single
    /// vehicle only adds 1 / max_vehicles_per_direction to a count, too faint
    /// for Glorot-sized weights to pick up.
    double count_gain = 50.0;

    bool operator==(const Architecture&) const = default;
};

nlohmann::json to_json(const Architecture& a);
Architecture architecture_from_json(const nlohmann::json& j);

/// Shared trunk: count columns scaled by count_gain, each state column through Conv1D + tanh, stacked and merged
/// by Conv2D + tanh. The actor ends in Dense(n_tbs) + softmax, the critic in
/// Dense(1).
std::vector<nn::LayerSpec> actor_layers(std::size_t n_tbs, const Architecture& a);
std::vector<nn::LayerSpec> critic_layers(const Architecture& a);

/// Actor and critic parameter sets. Plain value type: copying one is a
/// snapshot.
struct Policy {
    Policy(std::size_t n_tbs, Architecture arch = {});

    void initialize(std::mt19937_64& rng);

    std::size_t n_tbs() const { return n_tbs_; }
    const Architecture& architecture() const { return arch_; }

    nn::Network actor;
    nn::Network critic;

private:
    std::size_t n_tbs_;
    Architecture arch_;
};

enum class ActMode { Sample, Greedy };

struct Decision {
    TbIndex tb = 0;
    std::size_t row = 0;             // chosen row of the shuffled presentation
    ShuffledState presented;         // what the actor saw
    std::vector<double> shuffled_probs;
};

/// Probability of every original TB for one shuffled presentation.
std::vector<double> unshuffle(std::span<const double> shuffled_probs, std::span<const TbIndex> permutation);

/// Softmax output of the actor over the shuffled rows; throws
/// nn::NonFiniteError on a non-finite output.
std::vector<double> actor_probabilities(const Policy& policy, const nn::Tensor& presented);

/// Shuffles `state`, runs the actor and maps the chosen row back to a TB.
/// Greedy picks the highest probability, lowest shuffled row on ties.
Decision act(const Policy& policy, const SchedulerState& state, const ResourcePool& pool, std::mt19937_64& rng,
             ActMode mode);

}  // namespace vrls::agent
