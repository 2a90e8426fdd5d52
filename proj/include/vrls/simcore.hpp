#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vrls/channel.hpp"
#include "vrls/mobility.hpp"
#include "vrls/scenario.hpp"

namespace vrls {

struct BinTally {
    std::int64_t successes = 0;
    std::int64_t in_range = 0;

    bool operator==(const BinTally&) const = default;
};

struct PrrResult {
    std::vector<std::optional<double>> per_bin;  // nullopt: no receiver fell in the bin
    std::optional<double> min;                   // over non-empty bins
    std::optional<double> overall;               // all bins pooled

    /// No transmission reached any bin.
    bool empty() const { return !min.has_value(); }
};

/// Receivers further than the largest bin never enter any denominator.
class PrrAccumulator {
public:
    explicit PrrAccumulator(std::vector<RangeBin> bins);

    void add(const TransmissionOutcome& outcome);
    void reset();

    const std::vector<BinTally>& tallies() const { return tallies_; }
    const std::vector<RangeBin>& bins() const { return bins_; }
    std::int64_t transmissions() const { return transmissions_; }
    std::int64_t hd_losses() const { return hd_losses_; }
    std::int64_t collision_losses() const { return collision_losses_; }

    /// Index of the bin containing `d`, or -1.
    int bin_of(double d) const;

private:
    std::vector<RangeBin> bins_;
    std::vector<BinTally> tallies_;
    std::int64_t transmissions_ = 0;
    std::int64_t hd_losses_ = 0;
    std::int64_t collision_losses_ = 0;
};

PrrResult compute_prr(std::span<const BinTally> tallies);
PrrResult compute_prr(const PrrAccumulator& acc);

struct PrrWindow {
    int index = 0;
    TimeMs start = 0;
    TimeMs end = 0;
    bool partial = false;
    std::vector<BinTally> bins;
    std::int64_t transmissions = 0;
    std::int64_t hd_losses = 0;
    std::int64_t collision_losses = 0;

    PrrResult prr() const { return compute_prr(bins); }
};

/// Fixed-length reporting windows [k*len, (k+1)*len) over transmission time.
class WindowedPrr {
public:
    WindowedPrr(std::vector<RangeBin> bins, TimeMs window_ms);

    void add(const TransmissionOutcome& outcome);
    /// Closes every window ending at or before `t`.
    void close_until(TimeMs t);
    /// Closes the open window at `t`, marking it partial if it ends later.
    void flush(TimeMs t);

    const std::vector<PrrWindow>& windows() const { return closed_; }
    TimeMs window_ms() const { return window_ms_; }

private:
    void close_current(TimeMs t);

    TimeMs window_ms_;
    PrrAccumulator current_;
    int current_index_ = 0;
    std::vector<PrrWindow> closed_;
};

struct EntryContext {
    const Vehicle& vehicle;
    TimeMs now = 0;
    /// Initial population placed at start-up rather than a real DOCA entry.
    bool warmup = false;
    std::span<const Vehicle> population;  // everyone inside, entrant included (unassigned)
    const ScenarioConfig& scenario;
    /// PRR over transmissions since the previous non-warm-up entry.
    const PrrAccumulator& since_last_action;
};

/// Every scheduler answers synchronously at DOCA entry with a TB in [0, n_tbs).
class Scheduler {
public:
    virtual ~Scheduler() = default;
    virtual std::string name() const = 0;
    virtual TbIndex on_vehicle_entered(const EntryContext& ctx) = 0;
    /// Called at every CAM generation; a returned TB replaces the current one.
    virtual std::optional<TbIndex> on_generation(const Vehicle&, TimeMs) { return std::nullopt; }
    virtual void on_vehicle_exited(const Vehicle&, TimeMs) {}
    virtual void on_subframe(std::span<const TransmissionOutcome>) {}
};

/// Time of the transmission for a CAM generated at `generation` on `tb`: the
/// TB's subframe in the first pool occurrence starting after the generation
/// instant. Pool occurrences are back-to-back from t = 0.
TimeMs transmission_time(TimeMs generation, TbIndex tb, const ResourcePool& pool);

/// First generation instant phase + k * period not earlier than `earliest`.
TimeMs first_generation(TimeMs earliest, int phase, int period_ms);

/// Writes "time,tx,tb,receiver,distance,result" records, one per reception.
void write_trace_header(std::ostream& out);
void write_trace(std::ostream& out, const TransmissionOutcome& outcome);

struct SimulationOptions {
    std::ostream* trace = nullptr;
    bool keep_outcomes = false;
};

/// Subframe-stepped engine. Time advances in whole milliseconds; idle
/// milliseconds are skipped without changing the result.
class Simulation {
public:
    Simulation(const ScenarioConfig& scenario, Scheduler& scheduler, SimulationOptions options = {});

    /// Processes the next millisecond.
    void step();
    /// Processes every millisecond before `t`.
    void advance_to(TimeMs t);
    /// Flushes the open reporting window (partial if unfinished).
    void finish();

    TimeMs now() const { return cursor_; }
    std::int64_t actions() const { return actions_; }
    std::int64_t transmissions() const { return transmissions_; }

    const ScenarioConfig& scenario() const { return scenario_; }
    const Mobility& mobility() const { return mobility_; }
    const WindowedPrr& windows() const { return windows_; }
    const PrrAccumulator& since_last_action() const { return action_window_; }
    const std::vector<TransmissionOutcome>& outcomes() const { return outcomes_; }
    void clear_outcomes() { outcomes_.clear(); }

private:
    void process(TimeMs t);
    void enter(VehicleId id, TimeMs t, bool warmup);
    std::optional<TimeMs> next_event_time() const;
    TbIndex checked(TbIndex tb) const;

    ScenarioConfig scenario_;
    Scheduler& scheduler_;
    SimulationOptions options_;
    Mobility mobility_;
    Channel channel_;
    std::mt19937_64 cam_rng_;
    WindowedPrr windows_;
    PrrAccumulator action_window_;
    std::vector<TransmissionOutcome> outcomes_;
    TimeMs cursor_ = 0;
    std::int64_t actions_ = 0;
    std::int64_t transmissions_ = 0;
};

/// Independent RNG stream for a named purpose, derived from the scenario seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace vrls
