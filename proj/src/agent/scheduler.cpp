#include "vrls/agent/scheduler.hpp"

#include <stdexcept>

namespace vrls::agent {

VrlsScheduler::VrlsScheduler(const ScenarioConfig& scenario, Policy policy, ActMode mode, std::uint64_t seed,
                             bool record)
    : scenario_(scenario),
      policy_(std::move(policy)),
      mode_(mode),
      rng_(seed),
      record_(record),
      book_(scenario.n_tbs(), scenario.geometry.length) {
    if (policy_.n_tbs() != static_cast<std::size_t>(scenario.n_tbs()))
        throw std::invalid_argument("policy trained for " + std::to_string(policy_.n_tbs()) + " TBs, scenario has " +
                                    std::to_string(scenario.n_tbs()));
}

TbIndex VrlsScheduler::on_vehicle_entered(const EntryContext& ctx) {
    if (!ctx.warmup) {
        const auto window = compute_prr(ctx.since_last_action);
        if (acted_) previous_reward_ = compute_reward(window, previous_reward_);
        if (record_ && !transitions_.empty() && !transitions_.back().rewarded) {
            auto& last = transitions_.back();
            last.reward = previous_reward_;
            last.window_prr = window.min;
            last.rewarded = true;
        }
        acted_ = true;
    }

    book_.expire(ctx.now);
    const auto& v = ctx.vehicle;
    const auto state = build_state(book_, v.direction, ctx.now, scenario_);
    auto d = act(policy_, state, scenario_.pool, rng_, mode_);
    // the vehicle is at the DOCA edge at entry_time, which precedes `now` only for warm-up placements
    book_.record(d.tb, v.direction, v.entry_time, v.speed);

    if (!ctx.warmup) {
        ++decisions_;
        if (record_)
            transitions_.push_back({std::move(d.presented.matrix), std::move(d.presented.permutation), d.row, d.tb});
    }
    return d.tb;
}

}  // namespace vrls::agent
