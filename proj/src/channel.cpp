#include "vrls/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrls {

std::string to_string(ReceptionResult r) {
    switch (r) {
        case ReceptionResult::Success: return "SUCCESS";
        case ReceptionResult::HdLoss: return "HD_LOSS";
        case ReceptionResult::CollisionLoss: return "COLLISION_LOSS";
        case ReceptionResult::SinrLoss: return "SINR_LOSS";
        case ReceptionResult::OutOfRange: return "OUT_OF_RANGE";
    }
    return "?";
}

ReceptionResult parse_reception_result(std::string_view s) {
    if (s == "SUCCESS") return ReceptionResult::Success;
    if (s == "HD_LOSS") return ReceptionResult::HdLoss;
    if (s == "COLLISION_LOSS") return ReceptionResult::CollisionLoss;
    if (s == "SINR_LOSS") return ReceptionResult::SinrLoss;
    if (s == "OUT_OF_RANGE") return ReceptionResult::OutOfRange;
    throw std::invalid_argument("unknown reception result '" + std::string(s) + "'");
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double winner_b1_los_db(double d, double carrier_ghz, double antenna_height, double min_distance) {
    constexpr double kSpeedOfLight = 3.0e8;
    d = std::max(d, min_distance);
    const double h_eff = antenna_height - 1.0;
    const double breakpoint = 4.0 * h_eff * h_eff * carrier_ghz * 1.0e9 / kSpeedOfLight;
    const double freq_term = std::log10(carrier_ghz / 5.0);
    if (d < breakpoint) return 22.7 * std::log10(d) + 41.0 + 20.0 * freq_term;
    return 40.0 * std::log10(d) + 9.45 - 2.0 * 17.3 * std::log10(h_eff) + 2.7 * freq_term;
}

double pathloss_db(double d, const ChannelConfig& c) {
    const double ref = winner_b1_los_db(c.min_distance, c.carrier_ghz, c.antenna_height, c.min_distance);
    switch (c.pathloss) {
        case PathlossKind::WinnerB1: return winner_b1_los_db(d, c.carrier_ghz, c.antenna_height, c.min_distance);
        case PathlossKind::LogDistance:
            return ref + 10.0 * c.log_distance_exponent * std::log10(std::max(d, c.min_distance) / c.min_distance);
    }
    return ref;
}

double calibrate_sinr_threshold(const ChannelConfig& c, double target_range) {
    return c.tx_power_dbm - pathloss_db(target_range, c) - c.noise_dbm;
}

// ---------------------------------------------------------------------------

ShadowingField::ShadowingField(double sigma_db, double decorrelation_m)
    : sigma_db_(sigma_db), decorrelation_m_(decorrelation_m) {
    if (sigma_db < 0.0) throw std::invalid_argument("shadowing sigma must be non-negative");
    if (decorrelation_m <= 0.0) throw std::invalid_argument("decorrelation distance must be positive");
}

std::pair<VehicleId, VehicleId> ShadowingField::key(VehicleId a, VehicleId b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
}

double ShadowingField::sample(VehicleId a, VehicleId b, double separation, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, sigma_db_);
    const auto k = key(a, b);
    auto it = pairs_.find(k);
    if (it == pairs_.end()) {
        const double v = gauss(rng);
        pairs_.emplace(k, Entry{v, separation});
        return v;
    }
    const double moved = std::abs(separation - it->second.separation);
    if (moved == 0.0) return it->second.value_db;
    const double rho = std::exp(-moved / decorrelation_m_);
    it->second.value_db = rho * it->second.value_db + std::sqrt(1.0 - rho * rho) * gauss(rng);
    it->second.separation = separation;
    return it->second.value_db;
}

std::optional<double> ShadowingField::value(VehicleId a, VehicleId b) const {
    auto it = pairs_.find(key(a, b));
    if (it == pairs_.end()) return std::nullopt;
    return it->second.value_db;
}

void ShadowingField::forget(VehicleId v) {
    std::erase_if(pairs_, [v](const auto& kv) { return kv.first.first == v || kv.first.second == v; });
}

// ---------------------------------------------------------------------------

Channel::Channel(const ScenarioConfig& scenario, std::uint64_t seed)
    : config_(scenario.channel),
      pool_(scenario.pool),
      shadowing_(scenario.channel.shadowing_sigma_db, scenario.channel.decorrelation_m),
      rng_(seed) {}

std::vector<TransmissionOutcome> Channel::resolve_subframe(TimeMs time, std::span<const Transmission> transmitters,
                                                           std::span<const RadioNode> nodes) {
    std::vector<TransmissionOutcome> out;
    if (transmitters.empty()) return out;
    const int subframe = pool_.subframe_of(transmitters.front().tb);
    for (const auto& tx : transmitters) {
        if (tx.tb < 0 || tx.tb >= pool_.n_tbs()) throw std::logic_error("transmission on a TB outside the pool");
        if (pool_.subframe_of(tx.tb) != subframe) throw std::logic_error("transmissions span several subframes");
    }
    auto is_transmitting = [&](VehicleId id) {
        return std::any_of(transmitters.begin(), transmitters.end(), [id](const auto& t) { return t.id == id; });
    };

    out.reserve(transmitters.size());
    for (const auto& tx : transmitters) {
        TransmissionOutcome outcome{tx.id, tx.tb, time, {}};
        outcome.receptions.reserve(nodes.size());
        const bool shared_tb = std::count_if(transmitters.begin(), transmitters.end(),
                                             [&](const auto& t) { return t.tb == tx.tb; }) > 1;
        for (const auto& rx : nodes) {
            if (rx.id == tx.id) continue;
            const double d = distance(tx.pos, rx.pos);
            ReceptionResult r = ReceptionResult::Success;
            if (is_transmitting(rx.id)) {
                r = ReceptionResult::HdLoss;
            } else {
                switch (config_.variant) {
                    case ChannelVariant::Scd:
                        r = shared_tb ? ReceptionResult::CollisionLoss : ReceptionResult::Success;
                        break;
                    case ChannelVariant::McdRange: r = resolve_mcd_range(tx, rx, d, transmitters); break;
                    case ChannelVariant::McdSinr: r = resolve_mcd_sinr(tx, rx, d, transmitters); break;
                }
            }
            outcome.receptions.push_back({rx.id, d, r});
        }
        out.push_back(std::move(outcome));
    }
    return out;
}

ReceptionResult Channel::resolve_mcd_range(const Transmission& tx, const RadioNode& rx, double d,
                                           std::span<const Transmission> transmitters) const {
    if (d > config_.range) return ReceptionResult::OutOfRange;
    for (const auto& other : transmitters) {
        if (other.id == tx.id || other.tb != tx.tb) continue;
        if (distance(other.pos, rx.pos) <= config_.range) return ReceptionResult::CollisionLoss;
    }
    return ReceptionResult::Success;
}

ReceptionResult Channel::resolve_mcd_sinr(const Transmission& tx, const RadioNode& rx, double d,
                                          std::span<const Transmission> transmitters) {
    auto received_mw = [&](const Transmission& from, double dist) {
        const double shadow = shadowing_.sample(from.id, rx.id, dist, rng_);
        const double dbm = config_.tx_power_dbm - pathloss_db(dist, config_) - shadow;
        return std::pow(10.0, dbm / 10.0);
    };
    const double signal = received_mw(tx, d);
    double interference = 0.0;
    for (const auto& other : transmitters) {
        if (other.id == tx.id || other.tb != tx.tb) continue;
        interference += received_mw(other, distance(other.pos, rx.pos));
    }
    const double noise = std::pow(10.0, config_.noise_dbm / 10.0);
    const double sinr_db = 10.0 * std::log10(signal / (noise + interference));
    return sinr_db >= config_.sinr_threshold_db ? ReceptionResult::Success : ReceptionResult::SinrLoss;
}

}  // namespace vrls
