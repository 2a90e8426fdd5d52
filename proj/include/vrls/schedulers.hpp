#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vrls/simcore.hpp"

namespace vrls {

/// Uniform over all TBs, independent of the world.
class RandomScheduler : public Scheduler {
public:
    RandomScheduler(int n_tbs, std::uint64_t seed);

    std::string name() const override { return "random"; }
    TbIndex on_vehicle_entered(const EntryContext& ctx) override;
    TbIndex draw();

private:
    int n_tbs_;
    std::mt19937_64 rng_;
};

struct Mode4Params {
    TimeMs sensing_window_ms = 1000;
    double candidate_fraction = 0.2;
    int counter_min = 5;
    int counter_max = 15;
    double prob_resource_keep = 0.0;
};

/// Simplified sensing-based autonomous selection. Each vehicle senses TB
/// occupancy by in-range transmitters over the last sensing window, picks
/// uniformly among the least occupied candidate fraction, and reselects when
/// its counter (decremented per transmission) expires.
class Mode4Scheduler : public Scheduler {
public:
    Mode4Scheduler(int n_tbs, std::uint64_t seed, Mode4Params params = {});

    std::string name() const override { return "mode4"; }
    TbIndex on_vehicle_entered(const EntryContext& ctx) override;
    std::optional<TbIndex> on_generation(const Vehicle& v, TimeMs now) override;
    void on_vehicle_exited(const Vehicle& v, TimeMs now) override;
    void on_subframe(std::span<const TransmissionOutcome> outcomes) override;

    /// Lowest-occupancy candidate set for `v` at `now` (ties broken at random).
    std::vector<TbIndex> candidates(VehicleId v, TimeMs now);
    TbIndex select(VehicleId v, TimeMs now);
    std::vector<int> occupancy(VehicleId v, TimeMs now);
    int counter(VehicleId v) const;

private:
    struct State {
        std::deque<std::pair<TimeMs, TbIndex>> sensed;
        int counter = 0;
    };
    void purge(State& s, TimeMs now) const;
    int draw_counter();

    int n_tbs_;
    Mode4Params params_;
    std::mt19937_64 rng_;
    std::map<VehicleId, State> states_;
};

/// Closed-form PRR of a stationary single-collision-domain assignment where
/// every vehicle transmits once per period: a transmission sharing its TB is
/// lost everywhere, otherwise it reaches everyone outside its subframe.
/// nullopt for fewer than two vehicles.
std::optional<double> analytic_scd_prr(std::span<const TbIndex> assignment, const ResourcePool& pool);

/// Numerator of analytic_scd_prr (successful receptions per period).
std::int64_t analytic_scd_successes(std::span<const TbIndex> assignment, const ResourcePool& pool);

/// Exhaustive search over subframe occupancies for the free (nullopt) entries
/// of `snapshot`; pinned entries keep their TB. Returns a full assignment with
/// the maximal analytic PRR, ties broken toward the lowest TB indices.
/// Throws std::invalid_argument when the snapshot exceeds `cap` vehicles.
std::vector<TbIndex> brute_force_assign(std::span<const std::optional<TbIndex>> snapshot, const ResourcePool& pool,
                                        int cap = 10);

/// Places each entrant optimally given everyone already inside (SCD only).
class OracleScheduler : public Scheduler {
public:
    explicit OracleScheduler(const ResourcePool& pool, int cap = 10) : pool_(pool), cap_(cap) {}

    std::string name() const override { return "oracle"; }
    TbIndex on_vehicle_entered(const EntryContext& ctx) override;

private:
    ResourcePool pool_;
    int cap_;
};

/// Scripted assignment by vehicle id, for controlled experiments.
class FixedScheduler : public Scheduler {
public:
    explicit FixedScheduler(std::map<VehicleId, TbIndex> table) : table_(std::move(table)) {}

    std::string name() const override { return "fixed"; }
    TbIndex on_vehicle_entered(const EntryContext& ctx) override;

private:
    std::map<VehicleId, TbIndex> table_;
};

}  // namespace vrls
