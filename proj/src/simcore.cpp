#include "vrls/simcore.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace vrls {

namespace {

enum Stream : std::uint64_t { kMobility = 1, kChannel = 2, kCam = 3 };

TimeMs floor_div(TimeMs a, TimeMs b) {
    TimeMs q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

PrrAccumulator::PrrAccumulator(std::vector<RangeBin> bins) : bins_(std::move(bins)), tallies_(bins_.size()) {}

int PrrAccumulator::bin_of(double d) const {
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        if (bins_[i].contains(d)) return static_cast<int>(i);
    }
    return -1;
}

void PrrAccumulator::add(const TransmissionOutcome& outcome) {
    ++transmissions_;
    for (const auto& r : outcome.receptions) {
        const int b = bin_of(r.distance);
        if (b < 0) continue;
        ++tallies_[b].in_range;
        if (r.result == ReceptionResult::Success) ++tallies_[b].successes;
        if (r.result == ReceptionResult::HdLoss) ++hd_losses_;
        if (r.result == ReceptionResult::CollisionLoss) ++collision_losses_;
    }
}

void PrrAccumulator::reset() {
    std::fill(tallies_.begin(), tallies_.end(), BinTally{});
    transmissions_ = hd_losses_ = collision_losses_ = 0;
}

PrrResult compute_prr(std::span<const BinTally> tallies) {
    PrrResult out;
    std::int64_t s = 0, n = 0;
    for (const auto& t : tallies) {
        if (t.in_range == 0) {
            out.per_bin.push_back(std::nullopt);
            continue;
        }
        const double prr = static_cast<double>(t.successes) / static_cast<double>(t.in_range);
        out.per_bin.push_back(prr);
        out.min = out.min ? std::min(*out.min, prr) : prr;
        s += t.successes;
        n += t.in_range;
    }
    if (n > 0) out.overall = static_cast<double>(s) / static_cast<double>(n);
    return out;
}

PrrResult compute_prr(const PrrAccumulator& acc) { return compute_prr(acc.tallies()); }

// ---------------------------------------------------------------------------

WindowedPrr::WindowedPrr(std::vector<RangeBin> bins, TimeMs window_ms)
    : window_ms_(window_ms), current_(std::move(bins)) {
    if (window_ms <= 0) throw std::invalid_argument("window length must be positive");
}

void WindowedPrr::close_current(TimeMs t) {
    PrrWindow w;
    w.index = current_index_;
    w.start = current_index_ * window_ms_;
    w.end = std::min(w.start + window_ms_, t);
    w.partial = w.end < w.start + window_ms_;
    w.bins = current_.tallies();
    w.transmissions = current_.transmissions();
    w.hd_losses = current_.hd_losses();
    w.collision_losses = current_.collision_losses();
    closed_.push_back(std::move(w));
    current_.reset();
    ++current_index_;
}

void WindowedPrr::close_until(TimeMs t) {
    while ((current_index_ + 1) * window_ms_ <= t) close_current((current_index_ + 1) * window_ms_);
}

void WindowedPrr::add(const TransmissionOutcome& outcome) {
    close_until(floor_div(outcome.time, window_ms_) * window_ms_);
    current_.add(outcome);
}

void WindowedPrr::flush(TimeMs t) {
    close_until(t);
    if (t > current_index_ * window_ms_) close_current(t);
}

// ---------------------------------------------------------------------------

TimeMs transmission_time(TimeMs generation, TbIndex tb, const ResourcePool& pool) {
    const TimeMs len = pool.n_subframes;
    const TimeMs pool_start = (floor_div(generation, len) + 1) * len;
    return pool_start + pool.subframe_of(tb);
}

TimeMs first_generation(TimeMs earliest, int phase, int period_ms) {
    const TimeMs k = -floor_div(-(earliest - phase), period_ms);  // ceil((earliest - phase) / period)
    return phase + k * period_ms;
}

void write_trace_header(std::ostream& out) { out << "time,tx,tb,receiver,distance,result\n"; }

void write_trace(std::ostream& out, const TransmissionOutcome& o) {
    char dist[64];
    for (const auto& r : o.receptions) {
        std::snprintf(dist, sizeof dist, "%.17g", r.distance);
        out << o.time << ',' << o.tx << ',' << o.tb << ',' << r.receiver << ',' << dist << ',' << to_string(r.result)
            << '\n';
    }
}

// ---------------------------------------------------------------------------

Simulation::Simulation(const ScenarioConfig& scenario, Scheduler& scheduler, SimulationOptions options)
    : scenario_(validate(scenario)),
      scheduler_(scheduler),
      options_(options),
      mobility_(scenario_, derive_seed(scenario_.seed, kMobility)),
      channel_(scenario_, derive_seed(scenario_.seed, kChannel)),
      cam_rng_(derive_seed(scenario_.seed, kCam)),
      windows_(scenario_.prr_bins, scenario_.prr_window_ms()),
      action_window_(scenario_.prr_bins) {
    if (options_.trace) write_trace_header(*options_.trace);
    for (VehicleId id : mobility_.populate(0)) enter(id, 0, true);
}

TbIndex Simulation::checked(TbIndex tb) const {
    if (tb < 0 || tb >= scenario_.n_tbs())
        throw std::logic_error("scheduler '" + scheduler_.name() + "' returned TB " + std::to_string(tb) +
                               " outside [0, " + std::to_string(scenario_.n_tbs()) + ")");
    return tb;
}

void Simulation::enter(VehicleId id, TimeMs t, bool warmup) {
    Vehicle* v = mobility_.find(id);
    if (!v) throw std::logic_error("entering vehicle not found");
    v->assigned_tb.reset();
    v->pending_tx.reset();
    const Vehicle snapshot = *v;
    const EntryContext ctx{snapshot, warmup ? snapshot.entry_time : t, warmup, mobility_.vehicles(), scenario_,
                           action_window_};
    const TbIndex tb = checked(scheduler_.on_vehicle_entered(ctx));
    v = mobility_.find(id);
    v->assigned_tb = tb;
    std::uniform_int_distribution<int> phase(0, scenario_.pool.n_subframes - 1);
    v->cam_phase = phase(cam_rng_);
    v->next_generation = first_generation(std::max(v->entry_time, t), v->cam_phase, scenario_.cam_period_ms);
    if (!warmup) {
        ++actions_;
        action_window_.reset();
    }
}

std::optional<TimeMs> Simulation::next_event_time() const {
    std::optional<TimeMs> t = mobility_.next_event_time();
    auto consider = [&t](TimeMs c) {
        if (!t || c < *t) t = c;
    };
    for (const auto& v : mobility_.vehicles()) {
        consider(v.next_generation);
        if (v.pending_tx) consider(*v.pending_tx);
    }
    return t;
}

void Simulation::process(TimeMs t) {
    for (const auto& e : mobility_.advance(t)) {
        channel_.forget(e.vehicle.id);
        scheduler_.on_vehicle_exited(e.vehicle, t);
    }
    for (VehicleId id : mobility_.admit_arrivals(t)) enter(id, t, false);

    std::vector<Transmission> txs;
    std::vector<RadioNode> nodes;
    for (auto& v : mobility_.vehicles()) {
        if (v.next_generation == t) {
            if (auto reselected = scheduler_.on_generation(v, t)) v.assigned_tb = checked(*reselected);
            v.pending_tb = *v.assigned_tb;
            v.pending_tx = transmission_time(t, v.pending_tb, scenario_.pool);
            v.next_generation += scenario_.cam_period_ms;
        }
        const Point p = location(v, scenario_.geometry);
        nodes.push_back({v.id, p});
        if (v.pending_tx && *v.pending_tx == t) {
            txs.push_back({v.id, v.pending_tb, p});
            v.pending_tx.reset();
        }
    }
    if (txs.empty()) return;

    auto outcomes = channel_.resolve_subframe(t, txs, nodes);
    transmissions_ += static_cast<std::int64_t>(outcomes.size());
    for (const auto& o : outcomes) {
        windows_.add(o);
        action_window_.add(o);
        if (options_.trace) write_trace(*options_.trace, o);
    }
    scheduler_.on_subframe(outcomes);
    if (options_.keep_outcomes) {
        outcomes_.insert(outcomes_.end(), std::make_move_iterator(outcomes.begin()),
                         std::make_move_iterator(outcomes.end()));
    }
}

void Simulation::step() { advance_to(cursor_ + 1); }

void Simulation::advance_to(TimeMs t) {
    while (cursor_ < t) {
        const auto next = next_event_time();
        if (!next || *next >= t) {
            cursor_ = t;
            break;
        }
        const TimeMs at = std::max(*next, cursor_);
        process(at);
        cursor_ = at + 1;
    }
    windows_.close_until(cursor_);
}

void Simulation::finish() { windows_.flush(cursor_); }

}  // namespace vrls
