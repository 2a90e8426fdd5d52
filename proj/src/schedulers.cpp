#include "vrls/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vrls {

RandomScheduler::RandomScheduler(int n_tbs, std::uint64_t seed) : n_tbs_(n_tbs), rng_(seed) {
    if (n_tbs < 1) throw std::invalid_argument("empty pool");
}

TbIndex RandomScheduler::draw() {
    std::uniform_int_distribution<int> pick(0, n_tbs_ - 1);
    return pick(rng_);
}

TbIndex RandomScheduler::on_vehicle_entered(const EntryContext&) { return draw(); }

// ---------------------------------------------------------------------------

Mode4Scheduler::Mode4Scheduler(int n_tbs, std::uint64_t seed, Mode4Params params)
    : n_tbs_(n_tbs), params_(params), rng_(seed) {
    if (n_tbs < 1) throw std::invalid_argument("empty pool");
    if (params.counter_min < 1 || params.counter_max < params.counter_min)
        throw std::invalid_argument("bad reselection counter range");
}

int Mode4Scheduler::draw_counter() {
    std::uniform_int_distribution<int> c(params_.counter_min, params_.counter_max);
    return c(rng_);
}

void Mode4Scheduler::purge(State& s, TimeMs now) const {
    while (!s.sensed.empty() && s.sensed.front().first <= now - params_.sensing_window_ms) s.sensed.pop_front();
}

std::vector<int> Mode4Scheduler::occupancy(VehicleId v, TimeMs now) {
    std::vector<int> counts(n_tbs_, 0);
    auto it = states_.find(v);
    if (it == states_.end()) return counts;
    purge(it->second, now);
    for (const auto& [t, tb] : it->second.sensed) ++counts[tb];
    return counts;
}

std::vector<TbIndex> Mode4Scheduler::candidates(VehicleId v, TimeMs now) {
    const auto counts = occupancy(v, now);
    std::vector<TbIndex> order(n_tbs_);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    std::stable_sort(order.begin(), order.end(), [&](TbIndex a, TbIndex b) { return counts[a] < counts[b]; });
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params_.candidate_fraction * n_tbs_)));
    order.resize(std::min(order.size(), keep));
    return order;
}

TbIndex Mode4Scheduler::select(VehicleId v, TimeMs now) {
    const auto cand = candidates(v, now);
    std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
    return cand[pick(rng_)];
}

int Mode4Scheduler::counter(VehicleId v) const {
    auto it = states_.find(v);
    return it == states_.end() ? 0 : it->second.counter;
}

TbIndex Mode4Scheduler::on_vehicle_entered(const EntryContext& ctx) {
    // Out of coverage the vehicle starts with no sensing history.
    auto& s = states_[ctx.vehicle.id];
    s = State{};
    const TbIndex tb = select(ctx.vehicle.id, ctx.now);
    s.counter = draw_counter();
    return tb;
}

std::optional<TbIndex> Mode4Scheduler::on_generation(const Vehicle& v, TimeMs now) {
    auto& s = states_[v.id];
    bool reselect = false;
    if (s.counter == 0) {
        s.counter = draw_counter();
        std::bernoulli_distribution keep(params_.prob_resource_keep);
        reselect = !(params_.prob_resource_keep > 0.0 && keep(rng_));
    }
    --s.counter;
    if (!reselect) return std::nullopt;
    return select(v.id, now);
}

void Mode4Scheduler::on_vehicle_exited(const Vehicle& v, TimeMs) { states_.erase(v.id); }

void Mode4Scheduler::on_subframe(std::span<const TransmissionOutcome> outcomes) {
    for (const auto& o : outcomes) {
        for (const auto& r : o.receptions) {
            if (r.result == ReceptionResult::HdLoss || r.result == ReceptionResult::OutOfRange) continue;
            auto it = states_.find(r.receiver);
            if (it != states_.end()) it->second.sensed.emplace_back(o.time, o.tb);
        }
    }
}

// ---------------------------------------------------------------------------

std::int64_t analytic_scd_successes(std::span<const TbIndex> assignment, const ResourcePool& pool) {
    const auto n = static_cast<std::int64_t>(assignment.size());
    std::vector<int> per_tb(pool.n_tbs(), 0), per_sf(pool.n_subframes, 0);
    for (TbIndex tb : assignment) {
        ++per_tb[tb];
        ++per_sf[pool.subframe_of(tb)];
    }
    std::int64_t successes = 0;
    for (TbIndex tb : assignment) {
        if (per_tb[tb] > 1) continue;
        successes += n - per_sf[pool.subframe_of(tb)];
    }
    return successes;
}

std::optional<double> analytic_scd_prr(std::span<const TbIndex> assignment, const ResourcePool& pool) {
    const auto n = static_cast<std::int64_t>(assignment.size());
    if (n < 2) return std::nullopt;
    return static_cast<double>(analytic_scd_successes(assignment, pool)) / static_cast<double>(n * (n - 1));
}

namespace {

// Places `extra` vehicles into one subframe whose TBs already carry `counts`
// (indexed by subchannel), keeping as many singleton TBs as possible.
std::vector<int> place_in_subframe(std::vector<int> counts, int extra) {
    std::vector<int> chosen;
    for (int k = 0; k < extra; ++k) {
        int pick = -1;
        for (int c = 0; c < static_cast<int>(counts.size()) && pick < 0; ++c)
            if (counts[c] == 0) pick = c;
        if (pick < 0) {
            // Pile onto the most crowded TB: an already colliding TB loses nothing more.
            pick = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        }
        ++counts[pick];
        chosen.push_back(pick);
    }
    return chosen;
}

}  // namespace

std::vector<TbIndex> brute_force_assign(std::span<const std::optional<TbIndex>> snapshot, const ResourcePool& pool,
                                        int cap) {
    if (static_cast<int>(snapshot.size()) > cap)
        throw std::invalid_argument("oracle refuses populations above " + std::to_string(cap) + " vehicles");
    const int n_sf = pool.n_subframes;
    const int n_sch = pool.n_subchannels;

    std::vector<std::vector<int>> pinned(n_sf, std::vector<int>(n_sch, 0));
    std::vector<std::size_t> free_slots;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        if (snapshot[i]) {
            if (*snapshot[i] < 0 || *snapshot[i] >= pool.n_tbs()) throw std::invalid_argument("pinned TB outside pool");
            ++pinned[pool.subframe_of(*snapshot[i])][pool.subchannel_of(*snapshot[i])];
        } else {
            free_slots.push_back(i);
        }
    }

    std::vector<TbIndex> base(snapshot.size(), 0);
    for (std::size_t i = 0; i < snapshot.size(); ++i)
        if (snapshot[i]) base[i] = *snapshot[i];

    std::vector<TbIndex> best;
    std::int64_t best_score = -1;
    std::vector<int> split(n_sf, 0);

    auto evaluate = [&] {
        std::vector<TbIndex> free_tbs;
        for (int sf = 0; sf < n_sf; ++sf) {
            for (int sch : place_in_subframe(pinned[sf], split[sf])) free_tbs.push_back(pool.tb_index(sf, sch));
        }
        std::sort(free_tbs.begin(), free_tbs.end());
        std::vector<TbIndex> candidate = base;
        for (std::size_t k = 0; k < free_slots.size(); ++k) candidate[free_slots[k]] = free_tbs[k];
        const auto score = analytic_scd_successes(candidate, pool);
        if (score > best_score || (score == best_score && candidate < best)) {
            best_score = score;
            best = std::move(candidate);
        }
    };

    // Enumerate every composition of the free vehicles over the subframes.
    auto recurse = [&](auto&& self, int sf, int remaining) -> void {
        if (sf == n_sf - 1) {
            split[sf] = remaining;
            evaluate();
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            split[sf] = k;
            self(self, sf + 1, remaining - k);
        }
    };
    recurse(recurse, 0, static_cast<int>(free_slots.size()));
    return best;
}

TbIndex OracleScheduler::on_vehicle_entered(const EntryContext& ctx) {
    // Vehicles of the initial drop that are not assigned yet are left out.
    std::vector<std::optional<TbIndex>> snapshot;
    std::size_t entrant = 0;
    for (const auto& v : ctx.population) {
        if (v.id == ctx.vehicle.id) {
            entrant = snapshot.size();
            snapshot.push_back(std::nullopt);
        } else if (v.assigned_tb) {
            snapshot.push_back(v.assigned_tb);
        }
    }
    return brute_force_assign(snapshot, pool_, cap_)[entrant];
}

TbIndex FixedScheduler::on_vehicle_entered(const EntryContext& ctx) {
    auto it = table_.find(ctx.vehicle.id);
    if (it == table_.end()) throw std::out_of_range("no scripted TB for vehicle " + std::to_string(ctx.vehicle.id));
    return it->second;
}

}  // namespace vrls
