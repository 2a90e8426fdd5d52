#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vrls {

using TbIndex = int;
using VehicleId = std::int64_t;
using TimeMs = std::int64_t;

/// Raised for any invalid scenario configuration. The message starts with the
/// offending field path, e.g. "pool.n_subframes: empty pool".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Time-frequency grid of transmission blocks (TBs). A TB is one 1 ms subframe
/// times one subchannel; tb = subframe * n_subchannels + subchannel.
struct ResourcePool {
    int n_subframes = 10;
    int n_subchannels = 2;

    int n_tbs() const { return n_subframes * n_subchannels; }
    int subframe_of(TbIndex tb) const { return tb / n_subchannels; }
    int subchannel_of(TbIndex tb) const { return tb % n_subchannels; }
    TbIndex tb_index(int subframe, int subchannel) const { return subframe * n_subchannels + subchannel; }

    /// Two TBs conflict under half duplex iff they share a subframe.
    bool hd_conflict(TbIndex a, TbIndex b) const { return subframe_of(a) == subframe_of(b); }

    bool operator==(const ResourcePool&) const = default;
};

struct DocaGeometry {
    double length = 500.0;
    int lanes_per_direction = 1;
    double lane_width = 4.0;
    double vehicle_length = 5.0;

    int max_vehicles_per_direction() const;

    bool operator==(const DocaGeometry&) const = default;
};

enum class ChannelVariant { Scd, McdRange, McdSinr };
enum class PathlossKind { WinnerB1, LogDistance };

struct ChannelConfig {
    ChannelVariant variant = ChannelVariant::Scd;
    double tx_power_dbm = 23.0;
    // MCD_RANGE
    double range = 120.0;
    // MCD_SINR
    PathlossKind pathloss = PathlossKind::WinnerB1;
    double antenna_height = 1.5;
    double min_distance = 3.0;
    double carrier_ghz = 6.0;
    double log_distance_exponent = 2.0;
    double shadowing_sigma_db = 3.0;
    double decorrelation_m = 25.0;
    double noise_dbm = -95.0;
    double sinr_threshold_db = 0.0;

    bool operator==(const ChannelConfig&) const = default;
};

enum class MobilityPolicy { ConstantDensity, ExpReinsert };

struct MobilityConfig {
    MobilityPolicy policy = MobilityPolicy::ConstantDensity;
    int vehicles = 10;            // n for constant density, max_n for exp re-insertion
    double mean_offset_s = 2.5;   // re-insertion delay mean (exp re-insertion only)

    bool operator==(const MobilityConfig&) const = default;
};

/// Half-open distance interval [min, max) in meters.
struct RangeBin {
    double min = 0.0;
    double max = 0.0;

    bool contains(double d) const { return d >= min && d < max; }
    bool operator==(const RangeBin&) const = default;
};

struct ScenarioConfig {
    std::string name = "custom";
    DocaGeometry geometry;
    ResourcePool pool;
    ChannelConfig channel;
    MobilityConfig mobility;
    double speed = 50.0 / 3.6;
    int cam_period_ms = 100;
    int cam_size_bytes = 190;
    double headway_mean_s = 2.5;
    std::vector<RangeBin> prr_bins{{0.0, 505.0}};
    double prr_window_s = 10.0;
    std::uint64_t seed = 1;

    int n_tbs() const { return pool.n_tbs(); }
    int max_vehicles_per_direction() const { return geometry.max_vehicles_per_direction(); }
    TimeMs prr_window_ms() const;

    bool operator==(const ScenarioConfig&) const = default;
};

enum class BuiltinScenario { Mcd, McdNofade, ScdI, ScdII, ScdIII };

/// Checks every invariant; throws ConfigError naming the first violated field.
ScenarioConfig validate(ScenarioConfig config);

ScenarioConfig builtin_scenario(BuiltinScenario which);

/// Accepts "mcd", "mcd_nofade", "scd_i", "scd_ii", "scd_iii" (case-insensitive,
/// '-' accepted for '_').
BuiltinScenario parse_builtin_name(std::string_view name);
std::vector<std::string> builtin_names();

nlohmann::json to_json(const ScenarioConfig& config);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);

/// Applies environment overrides of the form VRLS_CFG_<PATH>=<value>, where
/// nested keys are joined by a double underscore (VRLS_CFG_GEOMETRY__LENGTH=250).
/// Values are parsed as JSON when possible, otherwise taken as strings.
void apply_env_overrides(nlohmann::json& doc, const std::vector<std::string>& environment);
std::vector<std::string> current_environment();

/// Loads a built-in by name or a scenario file by path, applies env overrides,
/// and validates.
ScenarioConfig load_scenario(const std::string& name_or_path);
void save_scenario(const ScenarioConfig& config, const std::string& path);

std::string to_string(ChannelVariant v);
std::string to_string(MobilityPolicy p);

}  // namespace vrls
