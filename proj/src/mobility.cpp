#include "vrls/mobility.hpp"

#include <algorithm>
#include <cmath>

namespace vrls {

std::string to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

double position_at(const Vehicle& v, TimeMs t) {
    return v.speed * static_cast<double>(t - v.entry_time) / 1000.0;
}

TimeMs exit_time(const Vehicle& v, double length) {
    auto t = v.entry_time + static_cast<TimeMs>(std::floor(length / v.speed * 1000.0));
    while (position_at(v, t) > length) --t;
    while (position_at(v, t) <= length) ++t;
    return t;
}

Point location(const Vehicle& v, const DocaGeometry& g) {
    if (v.direction == Direction::Forward) return {v.position, 0.0};
    return {g.length - v.position, g.lane_width};
}

// ---------------------------------------------------------------------------

ArrivalProcess::ArrivalProcess(double first_delay_mean_s, double headway_mean_s)
    : first_delay_mean_s_(first_delay_mean_s), headway_mean_s_(headway_mean_s) {}

TimeMs ArrivalProcess::draw_ms(double mean_s, std::mt19937_64& rng, TimeMs minimum) const {
    if (mean_s <= 0.0) return minimum;
    std::exponential_distribution<double> exp(1.0 / mean_s);
    return std::max(minimum, static_cast<TimeMs>(std::llround(exp(rng) * 1000.0)));
}

void ArrivalProcess::enqueue(Direction d, VehicleId v, TimeMs now, std::mt19937_64& rng) {
    const int i = index_of(d);
    queues_[i].push_back(v);
    if (!next_time_[i]) next_time_[i] = now + draw_ms(first_delay_mean_s_, rng, 0);
}

std::optional<Arrival> ArrivalProcess::next_arrival() const {
    std::optional<Arrival> best;
    for (Direction d : {Direction::Forward, Direction::Backward}) {
        const int i = index_of(d);
        if (!next_time_[i]) continue;
        if (!best || *next_time_[i] < best->time) best = Arrival{*next_time_[i], d, queues_[i].front()};
    }
    return best;
}

Arrival ArrivalProcess::pop(std::mt19937_64& rng) {
    const auto next = next_arrival();
    if (!next) throw std::logic_error("no pending arrival");
    const int i = index_of(next->direction);
    queues_[i].pop_front();
    // Consecutive vehicles in one lane never arrive in the same millisecond.
    next_time_[i] = queues_[i].empty() ? std::nullopt
                                       : std::optional<TimeMs>(next->time + draw_ms(headway_mean_s_, rng, 1));
    return *next;
}

// ---------------------------------------------------------------------------

Mobility::Mobility(const ScenarioConfig& scenario, std::uint64_t seed)
    : scenario_(scenario), rng_(seed), arrivals_(scenario.mobility.mean_offset_s, scenario.headway_mean_s) {}

std::vector<VehicleId> Mobility::populate(TimeMs now) {
    std::uniform_real_distribution<double> where(0.0, scenario_.geometry.length);
    std::bernoulli_distribution forward(0.5);
    std::vector<Vehicle> fresh;
    for (int i = 0; i < scenario_.mobility.vehicles; ++i) {
        Vehicle v;
        v.direction = forward(rng_) ? Direction::Forward : Direction::Backward;
        v.speed = scenario_.speed;
        const double pos = where(rng_);
        v.entry_time = now - static_cast<TimeMs>(std::floor(pos / v.speed * 1000.0));
        v.position = position_at(v, now);
        fresh.push_back(v);
    }
    std::stable_sort(fresh.begin(), fresh.end(), [](const auto& a, const auto& b) { return a.entry_time < b.entry_time; });
    std::vector<VehicleId> ids;
    for (auto& v : fresh) {
        v.id = next_id_++;
        ids.push_back(v.id);
        inside_.push_back(v);
    }
    return ids;
}

std::vector<ExitEvent> Mobility::advance(TimeMs now) {
    std::vector<ExitEvent> exits;
    const double length = scenario_.geometry.length;
    for (auto& v : inside_) v.position = position_at(v, now);
    for (const auto& v : inside_) {
        if (v.position > length) exits.push_back({v, now});
    }
    std::erase_if(inside_, [length](const Vehicle& v) { return v.position > length; });
    for (const auto& e : exits) reinsert(e);
    return exits;
}

void Mobility::reinsert(const ExitEvent& exit) {
    const Direction d = opposite(exit.vehicle.direction);
    if (scenario_.mobility.policy == MobilityPolicy::ConstantDensity) {
        immediate_.push_back({exit.time, d, exit.vehicle.id});
    } else {
        arrivals_.enqueue(d, exit.vehicle.id, exit.time, rng_);
    }
}

std::vector<VehicleId> Mobility::admit_arrivals(TimeMs now) {
    std::vector<Arrival> due;
    for (const auto& a : immediate_) {
        if (a.time <= now) due.push_back(a);
    }
    std::erase_if(immediate_, [now](const Arrival& a) { return a.time <= now; });
    while (true) {
        auto next = arrivals_.next_arrival();
        if (!next || next->time > now) break;
        due.push_back(arrivals_.pop(rng_));
    }

    std::vector<VehicleId> ids;
    for (const auto& a : due) {
        Vehicle v;
        v.id = a.vehicle;
        v.direction = a.direction;
        v.speed = scenario_.speed;
        v.entry_time = now;
        v.position = 0.0;
        auto at = std::lower_bound(inside_.begin(), inside_.end(), v.id,
                                   [](const Vehicle& x, VehicleId id) { return x.id < id; });
        inside_.insert(at, v);
        ids.push_back(v.id);
    }
    return ids;
}

std::optional<TimeMs> Mobility::next_event_time() const {
    std::optional<TimeMs> t;
    auto consider = [&t](TimeMs c) {
        if (!t || c < *t) t = c;
    };
    for (const auto& v : inside_) consider(exit_time(v, scenario_.geometry.length));
    for (const auto& a : immediate_) consider(a.time);
    if (auto a = arrivals_.next_arrival()) consider(a->time);
    return t;
}

Vehicle* Mobility::find(VehicleId id) {
    auto it = std::find_if(inside_.begin(), inside_.end(), [id](const Vehicle& v) { return v.id == id; });
    return it == inside_.end() ? nullptr : &*it;
}

const Vehicle* Mobility::find(VehicleId id) const { return const_cast<Mobility*>(this)->find(id); }

std::size_t Mobility::count(Direction d) const {
    return static_cast<std::size_t>(
        std::count_if(inside_.begin(), inside_.end(), [d](const Vehicle& v) { return v.direction == d; }));
}

}  // namespace vrls
