#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>

#include "vrls/agent/policy.hpp"
#include "vrls/simcore.hpp"

namespace vrls::agent {

/// One agent action. The reward arrives with the next action.
struct Transition {
    nn::Tensor presented;               // shuffled state fed to the actor
    std::vector<TbIndex> permutation;   // shuffled row -> TB
    std::size_t row = 0;
    TbIndex tb = 0;
    double reward = 0.0;
    std::optional<double> window_prr;   // min-bin PRR behind the reward
    bool rewarded = false;
};

/// Scheduler driven by a policy snapshot. Warm-up entries are assigned by the
/// policy too but are not agent actions.
class VrlsScheduler final : public Scheduler {
public:
    VrlsScheduler(const ScenarioConfig& scenario, Policy policy, ActMode mode, std::uint64_t seed,
                  bool record = false);

    std::string name() const override { return "vrls"; }
    TbIndex on_vehicle_entered(const EntryContext& ctx) override;

    void set_policy(const Policy& policy) { policy_ = policy; }
    const Policy& policy() const { return policy_; }
    const AssignmentBook& book() const { return book_; }

    /// Recorded actions, oldest first. Every one but the newest is rewarded.
    std::deque<Transition>& transitions() { return transitions_; }
    std::int64_t decisions() const { return decisions_; }
    double last_reward() const { return previous_reward_; }

private:
    ScenarioConfig scenario_;
    Policy policy_;
    ActMode mode_;
    std::mt19937_64 rng_;
    bool record_;
    AssignmentBook book_;
    std::deque<Transition> transitions_;
    std::int64_t decisions_ = 0;
    double previous_reward_ = 0.0;
    bool acted_ = false;
};

}  // namespace vrls::agent
