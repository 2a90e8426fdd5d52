#include "vrls/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vrls/channel.hpp"

extern char** environ;

namespace vrls {

using nlohmann::json;

int DocaGeometry::max_vehicles_per_direction() const {
    if (vehicle_length <= 0.0) return 0;
    return static_cast<int>(std::floor(length / vehicle_length)) * lanes_per_direction;
}

TimeMs ScenarioConfig::prr_window_ms() const { return static_cast<TimeMs>(std::llround(prr_window_s * 1000.0)); }

ScenarioConfig validate(ScenarioConfig c) {
    if (c.pool.n_subframes <= 0) throw ConfigError("pool.n_subframes", "empty pool");
    if (c.pool.n_subchannels <= 0) throw ConfigError("pool.n_subchannels", "empty pool");
    if (!(c.geometry.length > 0.0)) throw ConfigError("geometry.length", "must be positive");
    if (!(c.geometry.vehicle_length > 0.0)) throw ConfigError("geometry.vehicle_length", "must be positive");
    if (c.geometry.lanes_per_direction < 1) throw ConfigError("geometry.lanes_per_direction", "must be at least 1");
    if (c.geometry.lane_width < 0.0) throw ConfigError("geometry.lane_width", "must be non-negative");
    if (c.geometry.max_vehicles_per_direction() < 1)
        throw ConfigError("geometry.vehicle_length", "no vehicle fits the DOCA");
    if (!(c.speed > 0.0)) throw ConfigError("speed_mps", "must be positive");
    if (c.cam_period_ms <= 0) throw ConfigError("cam.period_ms", "must be positive");
    if (c.cam_period_ms < c.pool.n_subframes)
        throw ConfigError("cam.period_ms", "must be at least the pool length in subframes");
    if (c.cam_size_bytes <= 0) throw ConfigError("cam.size_bytes", "must be positive");
    if (!(c.headway_mean_s > 0.0)) throw ConfigError("headway_mean_s", "must be positive");

    const auto& ch = c.channel;
    if (!(ch.range > 0.0)) throw ConfigError("channel.range", "must be positive");
    if (!(ch.shadowing_sigma_db >= 0.0)) throw ConfigError("channel.shadowing_sigma_db", "must be non-negative");
    if (!(ch.decorrelation_m > 0.0)) throw ConfigError("channel.decorrelation_m", "must be positive");
    if (!(ch.min_distance > 0.0)) throw ConfigError("channel.min_distance", "must be positive");
    if (!(ch.antenna_height > 1.0)) throw ConfigError("channel.antenna_height", "must exceed 1 m");
    if (!(ch.carrier_ghz > 0.0)) throw ConfigError("channel.carrier_ghz", "must be positive");

    if (c.mobility.vehicles < 1) throw ConfigError("mobility.vehicles", "must be at least 1");
    if (c.mobility.vehicles > 2 * c.geometry.max_vehicles_per_direction())
        throw ConfigError("mobility.vehicles", "exceeds DOCA capacity");
    if (!(c.mobility.mean_offset_s >= 0.0)) throw ConfigError("mobility.mean_offset_s", "must be non-negative");

    if (c.prr_bins.empty()) throw ConfigError("prr.bins", "must be non-empty");
    for (std::size_t i = 0; i < c.prr_bins.size(); ++i) {
        const auto& b = c.prr_bins[i];
        const std::string path = "prr.bins[" + std::to_string(i) + "]";
        if (!(b.min >= 0.0) || !(b.max > b.min)) throw ConfigError(path, "need 0 <= min < max");
        if (i > 0 && b.min < c.prr_bins[i - 1].max) throw ConfigError(path, "bins must be sorted and non-overlapping");
    }
    if (!(c.prr_window_s > 0.0) || c.prr_window_ms() < 1) throw ConfigError("prr.window_s", "must be positive");
    return c;
}

namespace {

ScenarioConfig scd_base(const char* name, int vehicles, int subchannels, int subframes) {
    ScenarioConfig c;
    c.name = name;
    c.pool = {subframes, subchannels};
    c.channel.variant = ChannelVariant::Scd;
    c.channel.tx_power_dbm = 23.0;
    c.mobility = {MobilityPolicy::ExpReinsert, vehicles, 2.5};
    // One bin over the whole DOCA; 505 m covers the diagonal between lanes.
    c.prr_bins = {{0.0, 505.0}};
    return c;
}

ScenarioConfig mcd_base(const char* name) {
    ScenarioConfig c;
    c.name = name;
    c.pool = {10, 2};
    c.channel.tx_power_dbm = -5.0;
    c.channel.range = 120.0;
    c.mobility = {MobilityPolicy::ConstantDensity, 30, 2.5};
    c.prr_bins = {{0.0, 50.0}, {50.0, 100.0}};
    return c;
}

std::string normalize_name(std::string_view name) {
    std::string s(name);
    for (auto& ch : s) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (ch == '-') ch = '_';
    }
    return s;
}

}  // namespace

ScenarioConfig builtin_scenario(BuiltinScenario which) {
    ScenarioConfig c;
    switch (which) {
        case BuiltinScenario::ScdI: c = scd_base("scd_i", 10, 2, 10); break;
        case BuiltinScenario::ScdII: c = scd_base("scd_ii", 4, 10, 2); break;
        case BuiltinScenario::ScdIII: c = scd_base("scd_iii", 5, 4, 5); break;
        case BuiltinScenario::Mcd:
            c = mcd_base("mcd");
            c.channel.variant = ChannelVariant::McdSinr;
            c.channel.sinr_threshold_db = calibrate_sinr_threshold(c.channel, c.channel.range);
            break;
        case BuiltinScenario::McdNofade:
            c = mcd_base("mcd_nofade");
            c.channel.variant = ChannelVariant::McdRange;
            c.mobility.policy = MobilityPolicy::ExpReinsert;
            break;
    }
    return validate(c);
}

BuiltinScenario parse_builtin_name(std::string_view name) {
    const auto s = normalize_name(name);
    if (s == "mcd") return BuiltinScenario::Mcd;
    if (s == "mcd_nofade") return BuiltinScenario::McdNofade;
    if (s == "scd_i") return BuiltinScenario::ScdI;
    if (s == "scd_ii") return BuiltinScenario::ScdII;
    if (s == "scd_iii") return BuiltinScenario::ScdIII;
    throw ConfigError("scenario", "unknown built-in '" + std::string(name) + "'");
}

std::vector<std::string> builtin_names() { return {"mcd", "mcd_nofade", "scd_i", "scd_ii", "scd_iii"}; }

std::string to_string(ChannelVariant v) {
    switch (v) {
        case ChannelVariant::Scd: return "scd";
        case ChannelVariant::McdRange: return "mcd_range";
        case ChannelVariant::McdSinr: return "mcd_sinr";
    }
    return "?";
}

std::string to_string(MobilityPolicy p) {
    return p == MobilityPolicy::ConstantDensity ? "constant_density" : "exp_reinsert";
}

// ---------------------------------------------------------------------------
// JSON mapping

json to_json(const ScenarioConfig& c) {
    json bins = json::array();
    for (const auto& b : c.prr_bins) bins.push_back({b.min, b.max});
    const auto& ch = c.channel;
    return {
        {"name", c.name},
        {"geometry",
         {{"length", c.geometry.length},
          {"lanes_per_direction", c.geometry.lanes_per_direction},
          {"lane_width", c.geometry.lane_width},
          {"vehicle_length", c.geometry.vehicle_length}}},
        {"pool", {{"n_subframes", c.pool.n_subframes}, {"n_subchannels", c.pool.n_subchannels}}},
        {"channel",
         {{"variant", to_string(ch.variant)},
          {"tx_power_dbm", ch.tx_power_dbm},
          {"range", ch.range},
          {"pathloss", ch.pathloss == PathlossKind::WinnerB1 ? "winner_b1" : "log_distance"},
          {"antenna_height", ch.antenna_height},
          {"min_distance", ch.min_distance},
          {"carrier_ghz", ch.carrier_ghz},
          {"log_distance_exponent", ch.log_distance_exponent},
          {"shadowing_sigma_db", ch.shadowing_sigma_db},
          {"decorrelation_m", ch.decorrelation_m},
          {"noise_dbm", ch.noise_dbm},
          {"sinr_threshold_db", ch.sinr_threshold_db}}},
        {"mobility",
         {{"policy", to_string(c.mobility.policy)},
          {"vehicles", c.mobility.vehicles},
          {"mean_offset_s", c.mobility.mean_offset_s}}},
        {"speed_mps", c.speed},
        {"cam", {{"period_ms", c.cam_period_ms}, {"size_bytes", c.cam_size_bytes}}},
        {"headway_mean_s", c.headway_mean_s},
        {"prr", {{"bins", bins}, {"window_s", c.prr_window_s}}},
        {"seed", c.seed},
    };
}

namespace {

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.emplace_back(key);
        auto it = node_.find(key);
        if (it == node_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key), "wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.emplace_back(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void reject_unknown() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ConfigError(path_.empty() ? it.key() : path_ + "." + it.key(), "unknown key");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::vector<std::string> seen_;
};

template <typename Fn>
void section(Reader& parent, const char* key, Fn&& fn) {
    if (const json* node = parent.child(key)) {
        Reader r(*node, parent.field(key));
        fn(r);
        r.reject_unknown();
    }
}

}  // namespace

ScenarioConfig scenario_from_json(const json& doc) {
    ScenarioConfig c;
    Reader root(doc, "");
    root.get("name", c.name);
    root.get("speed_mps", c.speed);
    root.get("headway_mean_s", c.headway_mean_s);
    root.get("seed", c.seed);
    section(root, "geometry", [&](Reader& r) {
        r.get("length", c.geometry.length);
        r.get("lanes_per_direction", c.geometry.lanes_per_direction);
        r.get("lane_width", c.geometry.lane_width);
        r.get("vehicle_length", c.geometry.vehicle_length);
    });
    section(root, "pool", [&](Reader& r) {
        r.get("n_subframes", c.pool.n_subframes);
        r.get("n_subchannels", c.pool.n_subchannels);
    });
    section(root, "channel", [&](Reader& r) {
        auto& ch = c.channel;
        std::string variant = to_string(ch.variant);
        std::string pathloss = ch.pathloss == PathlossKind::WinnerB1 ? "winner_b1" : "log_distance";
        r.get("variant", variant);
        r.get("pathloss", pathloss);
        if (variant == "scd") ch.variant = ChannelVariant::Scd;
        else if (variant == "mcd_range") ch.variant = ChannelVariant::McdRange;
        else if (variant == "mcd_sinr") ch.variant = ChannelVariant::McdSinr;
        else throw ConfigError(r.field("variant"), "expected scd | mcd_range | mcd_sinr");
        if (pathloss == "winner_b1") ch.pathloss = PathlossKind::WinnerB1;
        else if (pathloss == "log_distance") ch.pathloss = PathlossKind::LogDistance;
        else throw ConfigError(r.field("pathloss"), "expected winner_b1 | log_distance");
        r.get("tx_power_dbm", ch.tx_power_dbm);
        r.get("range", ch.range);
        r.get("antenna_height", ch.antenna_height);
        r.get("min_distance", ch.min_distance);
        r.get("carrier_ghz", ch.carrier_ghz);
        r.get("log_distance_exponent", ch.log_distance_exponent);
        r.get("shadowing_sigma_db", ch.shadowing_sigma_db);
        r.get("decorrelation_m", ch.decorrelation_m);
        r.get("noise_dbm", ch.noise_dbm);
        r.get("sinr_threshold_db", ch.sinr_threshold_db);
    });
    section(root, "mobility", [&](Reader& r) {
        std::string policy = to_string(c.mobility.policy);
        r.get("policy", policy);
        if (policy == "constant_density") c.mobility.policy = MobilityPolicy::ConstantDensity;
        else if (policy == "exp_reinsert") c.mobility.policy = MobilityPolicy::ExpReinsert;
        else throw ConfigError(r.field("policy"), "expected constant_density | exp_reinsert");
        r.get("vehicles", c.mobility.vehicles);
        r.get("mean_offset_s", c.mobility.mean_offset_s);
    });
    section(root, "cam", [&](Reader& r) {
        r.get("period_ms", c.cam_period_ms);
        r.get("size_bytes", c.cam_size_bytes);
    });
    section(root, "prr", [&](Reader& r) {
        if (const json* bins = r.child("bins")) {
            if (!bins->is_array()) throw ConfigError(r.field("bins"), "expected a list of [min, max] pairs");
            c.prr_bins.clear();
            for (const auto& b : *bins) {
                if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
                    throw ConfigError(r.field("bins"), "expected a list of [min, max] pairs");
                c.prr_bins.push_back({b[0].get<double>(), b[1].get<double>()});
            }
        }
        r.get("window_s", c.prr_window_s);
    });
    root.reject_unknown();
    return c;
}

void apply_env_overrides(json& doc, const std::vector<std::string>& environment) {
    static constexpr std::string_view prefix = "VRLS_CFG_";
    for (const auto& entry : environment) {
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        const std::string value = entry.substr(eq + 1);
        for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));

        json* node = &doc;
        std::size_t start = 0;
        while (true) {
            const auto sep = key.find("__", start);
            const std::string part = key.substr(start, sep == std::string::npos ? std::string::npos : sep - start);
            if (sep == std::string::npos) {
                json parsed = json::parse(value, nullptr, false);
                (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
                break;
            }
            node = &(*node)[part];
            start = sep + 2;
        }
    }
}

std::vector<std::string> current_environment() {
    std::vector<std::string> out;
    for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
    return out;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
    json doc;
    std::ifstream in(name_or_path);
    if (in) {
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ConfigError(name_or_path, std::string("malformed scenario file: ") + e.what());
        }
    } else {
        doc = to_json(builtin_scenario(parse_builtin_name(name_or_path)));
    }
    apply_env_overrides(doc, current_environment());
    return validate(scenario_from_json(doc));
}

void save_scenario(const ScenarioConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(config).dump(2) << "\n";
}

}  // namespace vrls
