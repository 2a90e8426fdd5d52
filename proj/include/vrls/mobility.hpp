#pragma once

#include <array>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "vrls/channel.hpp"
#include "vrls/scenario.hpp"

namespace vrls {

enum class Direction { Forward, Backward };

inline Direction opposite(Direction d) { return d == Direction::Forward ? Direction::Backward : Direction::Forward; }
inline int index_of(Direction d) { return d == Direction::Forward ? 0 : 1; }
std::string to_string(Direction d);

struct Vehicle {
    VehicleId id = 0;
    Direction direction = Direction::Forward;
    double position = 0.0;  // meters from the vehicle's own entry point
    double speed = 0.0;     // m/s
    TimeMs entry_time = 0;
    std::optional<TbIndex> assigned_tb;
    int cam_phase = 0;  // generation offset in [0, n_subframes) within the CAM period

    // CAM schedule, maintained by the simulation engine.
    TimeMs next_generation = 0;
    std::optional<TimeMs> pending_tx;
    TbIndex pending_tb = 0;
};

/// Position measured from the entry point; exact kinematics from the entry time.
double position_at(const Vehicle& v, TimeMs t);

/// First millisecond at which the vehicle is past `length`.
TimeMs exit_time(const Vehicle& v, double length);

/// Planar location: forward lane at y = 0 running +x, backward lane at
/// y = lane_width running -x.
Point location(const Vehicle& v, const DocaGeometry& geometry);

struct Arrival {
    TimeMs time = 0;
    Direction direction = Direction::Forward;
    VehicleId vehicle = 0;
};

/// Per-direction Poisson arrival process feeding vehicles waiting outside the
/// DOCA back in. A direction with nobody waiting is at its cap and produces no
/// arrivals; once a vehicle queues up, its arrival is drawn `first_delay_mean`
/// seconds (exponential) after it joined, and each following vehicle arrives an
/// exponential headway after its predecessor.
class ArrivalProcess {
public:
    ArrivalProcess(double first_delay_mean_s, double headway_mean_s);

    void enqueue(Direction d, VehicleId v, TimeMs now, std::mt19937_64& rng);

    /// Earliest pending arrival over both directions (forward wins ties).
    std::optional<Arrival> next_arrival() const;

    /// Removes the arrival returned by next_arrival() and arms the next one.
    Arrival pop(std::mt19937_64& rng);

    std::size_t waiting() const { return queues_[0].size() + queues_[1].size(); }
    std::size_t waiting(Direction d) const { return queues_[index_of(d)].size(); }

private:
    TimeMs draw_ms(double mean_s, std::mt19937_64& rng, TimeMs minimum) const;

    double first_delay_mean_s_;
    double headway_mean_s_;
    std::array<std::deque<VehicleId>, 2> queues_;
    std::array<std::optional<TimeMs>, 2> next_time_;
};

struct ExitEvent {
    Vehicle vehicle;
    TimeMs time = 0;
};

/// Owns the vehicle population: initial drop, constant-speed motion, exits at
/// the DOCA boundary and re-insertion from the opposite direction.
class Mobility {
public:
    Mobility(const ScenarioConfig& scenario, std::uint64_t seed);

    /// Places the configured number of vehicles uniformly along both directions
    /// at time `now`. Returns their ids ordered by (past) entry time.
    std::vector<VehicleId> populate(TimeMs now);

    /// Moves every vehicle to time `now`, removes those past the boundary and
    /// schedules their re-insertion. Exits are ordered by vehicle id.
    std::vector<ExitEvent> advance(TimeMs now);

    /// Vehicles re-entering at `now`, placed at position 0 with entry_time = now.
    std::vector<VehicleId> admit_arrivals(TimeMs now);

    /// Next exit or arrival strictly relevant after the last processed time.
    std::optional<TimeMs> next_event_time() const;

    std::vector<Vehicle>& vehicles() { return inside_; }
    const std::vector<Vehicle>& vehicles() const { return inside_; }
    Vehicle* find(VehicleId id);
    const Vehicle* find(VehicleId id) const;
    std::size_t population() const { return inside_.size(); }
    std::size_t waiting() const { return arrivals_.waiting() + immediate_.size(); }
    std::size_t fleet_size() const { return population() + waiting(); }
    std::size_t count(Direction d) const;

private:
    void reinsert(const ExitEvent& exit);

    ScenarioConfig scenario_;
    std::mt19937_64 rng_;
    ArrivalProcess arrivals_;
    std::vector<Arrival> immediate_;  // constant-density re-entries
    std::vector<Vehicle> inside_;     // sorted by id
    VehicleId next_id_ = 0;
};

}  // namespace vrls
