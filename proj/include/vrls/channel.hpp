#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vrls/scenario.hpp"

namespace vrls {

enum class ReceptionResult { Success, HdLoss, CollisionLoss, SinrLoss, OutOfRange };

std::string to_string(ReceptionResult r);
ReceptionResult parse_reception_result(std::string_view s);

struct Point {
    double x = 0.0;
    double y = 0.0;
};

double distance(Point a, Point b);

struct Reception {
    VehicleId receiver = 0;
    double distance = 0.0;
    ReceptionResult result = ReceptionResult::Success;
};

/// One broadcast and what every other vehicle in the DOCA made of it. The
/// receiver list never contains the transmitter.
struct TransmissionOutcome {
    VehicleId tx = 0;
    TbIndex tb = 0;
    TimeMs time = 0;
    std::vector<Reception> receptions;
};

struct RadioNode {
    VehicleId id = 0;
    Point pos;
};

struct Transmission {
    VehicleId id = 0;
    TbIndex tb = 0;
    Point pos;
};

/// WINNER+ B1 line-of-sight pathloss (both antennas at `antenna_height`,
/// effective heights h - 1 m), evaluated at max(d, min_distance).
double winner_b1_los_db(double distance, double carrier_ghz, double antenna_height, double min_distance);

/// Pathloss of the configured model. The log-distance fallback is anchored at
/// the WINNER+ B1 value at min_distance: PL(d) = PL(d0) + 10 n log10(d / d0).
double pathloss_db(double distance, const ChannelConfig& config);

/// SINR threshold such that a lone transmitter at tx_power_dbm is decodable
/// out to exactly `target_range` with zero shadowing (the median range).
double calibrate_sinr_threshold(const ChannelConfig& config, double target_range);

/// Spatially correlated log-normal shadowing per unordered vehicle pair,
/// modeled as an AR(1) process over the change of pair separation.
class ShadowingField {
public:
    ShadowingField(double sigma_db, double decorrelation_m);

    /// First call for a pair draws N(0, sigma); later calls apply
    /// new = rho * old + sqrt(1 - rho^2) * N(0, sigma), rho = exp(-|dsep| / decorrelation).
    /// A zero separation change returns the stored value without consuming randomness.
    double sample(VehicleId a, VehicleId b, double separation, std::mt19937_64& rng);

    std::optional<double> value(VehicleId a, VehicleId b) const;
    void forget(VehicleId v);
    std::size_t size() const { return pairs_.size(); }

private:
    struct Entry {
        double value_db;
        double separation;
    };
    static std::pair<VehicleId, VehicleId> key(VehicleId a, VehicleId b);

    double sigma_db_;
    double decorrelation_m_;
    std::map<std::pair<VehicleId, VehicleId>, Entry> pairs_;
};

/// Resolves receptions for one subframe under the configured channel variant.
class Channel {
public:
    Channel(const ScenarioConfig& scenario, std::uint64_t seed);

    /// All `transmitters` must use TBs of one subframe (std::logic_error otherwise).
    /// `nodes` is every vehicle currently in the DOCA, transmitters included.
    std::vector<TransmissionOutcome> resolve_subframe(TimeMs time, std::span<const Transmission> transmitters,
                                                      std::span<const RadioNode> nodes);

    void forget(VehicleId v) { shadowing_.forget(v); }
    const ChannelConfig& config() const { return config_; }

private:
    ReceptionResult resolve_mcd_range(const Transmission& tx, const RadioNode& rx, double d,
                                      std::span<const Transmission> transmitters) const;
    ReceptionResult resolve_mcd_sinr(const Transmission& tx, const RadioNode& rx, double d,
                                     std::span<const Transmission> transmitters);

    ChannelConfig config_;
    ResourcePool pool_;
    ShadowingField shadowing_;
    std::mt19937_64 rng_;
};

}  // namespace vrls
