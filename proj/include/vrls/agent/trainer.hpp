#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vrls/agent/scheduler.hpp"
#include "vrls/nn/checkpoint.hpp"
#include "vrls/nn/optimizer.hpp"

namespace vrls::agent {

struct TrainConfig {
    int workers = 16;
    std::int64_t epochs = 500;
    int actions_per_epoch = 60;
    double gamma = 0.0;  // reward of the next inter-entry window only
    double entropy_beta = 0.01;
    double value_coef = 1.0;  // critic loss value_coef * 0.5 * (R - V)^2
    bool synchronous = true;
    std::string optimizer = "rmsprop";
    double lr_base = 1e-3;
    double lr_decay = 0.01;
    double lr_power = 1.1;
    std::uint64_t seed = 1;
    Architecture architecture;
};

nlohmann::json to_json(const TrainConfig& c);

struct EpochRecord {
    std::int64_t epoch = 0;
    double mean_reward = 0.0;
    double mean_prr = 0.0;
    double lr = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);

struct Trajectory {
    std::vector<Transition> steps;
    nn::Tensor bootstrap;  // state presented at the action after the last step

    double mean_reward() const;
    /// Mean over steps with a non-empty window; nullopt if there are none.
    std::optional<double> mean_prr() const;
};

struct Gradients {
    nn::ParameterSet actor;
    nn::ParameterSet critic;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
};

/// Discounted n-step returns r_t + gamma * r_{t+1} + ... bootstrapped with
/// `bootstrap_value` after the last reward.
std::vector<double> discounted_returns(std::span<const double> rewards, double bootstrap_value, double gamma);

/// A3C loss gradients of one trajectory, summed over its steps:
///   actor  -log pi(a|s) * A - beta * H(pi(.|s))
///   critic value_coef * 0.5 * (R - V(s))^2
/// with A = R - V(s) treated as a constant for the actor. Throws
/// nn::NonFiniteError if either loss is not finite.
Gradients trajectory_gradients(const Policy& policy, const Trajectory& trajectory, const TrainConfig& config);

/// Owns the global parameters. Every update and snapshot happens under one
/// lock, so updates are totally ordered and snapshots never see half of one.
class Coordinator {
public:
    Coordinator(Policy initial, const TrainConfig& config, std::int64_t start_epoch = 0);

    Policy snapshot() const;
    std::int64_t epoch() const;
    double current_lr() const;

    /// Applies `g` at the current epoch's step size and advances the epoch
    /// counter. Returns the record of the applied epoch.
    EpochRecord apply(const Gradients& g, double mean_reward, double mean_prr);

    nn::ParameterSet actor_optimizer_state() const;
    nn::ParameterSet critic_optimizer_state() const;
    void set_optimizer_state(const nn::ParameterSet& actor, const nn::ParameterSet& critic);

private:
    mutable std::mutex mutex_;
    Policy global_;
    TrainConfig config_;
    std::unique_ptr<nn::Optimizer> actor_opt_;
    std::unique_ptr<nn::Optimizer> critic_opt_;
    std::int64_t epoch_;
};

/// One independent simulation with its own seed, collecting on-policy
/// trajectories.
class Worker {
public:
    Worker(const ScenarioConfig& scenario, const Policy& policy, int index, std::uint64_t seed);
    Worker(const Worker&) = delete;
    Worker& operator=(const Worker&) = delete;

    Trajectory collect(const Policy& snapshot, int actions);
    int index() const { return index_; }

private:
    int index_;
    ScenarioConfig scenario_;
    VrlsScheduler scheduler_;
    Simulation sim_;
};

struct TrainResult {
    Policy policy;
    std::int64_t epoch = 0;  // schedule epoch after the last update
    nn::ParameterSet actor_optimizer_state;
    nn::ParameterSet critic_optimizer_state;
    std::vector<EpochRecord> curve;
    std::vector<std::string> worker_failures;
};

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
    std::ostream* log = nullptr;
};

/// Trains from `initial` (fresh initialization when empty) for
/// `config.epochs` applied updates. Synchronous mode steps every worker in
/// lockstep and applies their gradients averaged in worker order.
TrainResult train(const ScenarioConfig& scenario, const TrainConfig& config, std::optional<Policy> initial = {},
                  std::int64_t start_epoch = 0, TrainHooks hooks = {});

nn::Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& config, const std::string& scenario);
Policy policy_from_checkpoint(const nn::Checkpoint& ck);

struct RetrainOptions {
    bool restart_schedule = true;
};

/// Continues training a checkpointed policy on another scenario with the same
/// pool size. Zero epochs leaves the parameters untouched.
TrainResult retrain(const nn::Checkpoint& ck, const ScenarioConfig& scenario, const TrainConfig& config,
                    RetrainOptions options = {}, TrainHooks hooks = {});

}  // namespace vrls::agent
