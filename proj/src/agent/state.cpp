#include "vrls/agent/state.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace vrls::agent {

AssignmentBook::AssignmentBook(int n_tbs, double doca_length)
    : n_tbs_(n_tbs), length_(doca_length), slots_(static_cast<std::size_t>(n_tbs) * 2) {
    if (n_tbs < 1) throw std::invalid_argument("empty pool");
}

double AssignmentBook::travelled(const Entry& e, TimeMs now) const {
    return e.speed * static_cast<double>(now - e.entry_time) / 1000.0;
}

void AssignmentBook::record(TbIndex tb, Direction d, TimeMs entry_time, double speed) {
    if (tb < 0 || tb >= n_tbs_) throw std::out_of_range("TB outside pool");
    auto& s = slot(tb, d);
    s.live.push_back({entry_time, speed});
    s.last = s.live.back();
}

void AssignmentBook::expire(TimeMs now) {
    for (auto& s : slots_) std::erase_if(s.live, [&](const Entry& e) { return expired(e, now); });
}

int AssignmentBook::count(TbIndex tb, Direction d, TimeMs now) const {
    const auto& live = slot(tb, d).live;
    return static_cast<int>(std::count_if(live.begin(), live.end(), [&](const Entry& e) { return !expired(e, now); }));
}

int AssignmentBook::total(Direction d, TimeMs now) const {
    int n = 0;
    for (TbIndex tb = 0; tb < n_tbs_; ++tb) n += count(tb, d, now);
    return n;
}

std::optional<AssignmentBook::Entry> AssignmentBook::last(TbIndex tb, Direction d) const { return slot(tb, d).last; }

SchedulerState build_state(const AssignmentBook& book, Direction entrant, TimeMs now, const ScenarioConfig& scenario) {
    const int n = scenario.n_tbs();
    if (book.n_tbs() != n) throw std::invalid_argument("bookkeeping and scenario pools differ");
    const double capacity = scenario.max_vehicles_per_direction();
    const double length = scenario.geometry.length;

    SchedulerState s{nn::Tensor({static_cast<std::size_t>(n), 4}), std::vector<int>(n)};
    const Direction dirs[2] = {entrant, opposite(entrant)};
    for (TbIndex tb = 0; tb < n; ++tb) {
        s.subframe[tb] = scenario.pool.subframe_of(tb);
        for (int k = 0; k < 2; ++k) {
            const int count = book.count(tb, dirs[k], now);
            double dx = 0.0;
            if (count > 0) {
                if (auto last = book.last(tb, dirs[k])) dx = std::clamp(book.travelled(*last, now) / length, 0.0, 1.0);
            }
            s.matrix.at(tb, 2 * k) = std::min(1.0, count / capacity);
            s.matrix.at(tb, 2 * k + 1) = dx;
        }
    }
    return s;
}

ShuffledState shuffle_state(const SchedulerState& state, const ResourcePool& pool, std::mt19937_64& rng) {
    const int n = pool.n_tbs();
    if (state.matrix.shape() != nn::Shape{static_cast<std::size_t>(n), 4})
        throw std::invalid_argument("state does not match the pool");
    std::vector<int> order(pool.n_subframes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    ShuffledState out{nn::Tensor(state.matrix.shape()), {}};
    out.permutation.reserve(n);
    for (int sf : order)
        for (int sch = 0; sch < pool.n_subchannels; ++sch) out.permutation.push_back(pool.tb_index(sf, sch));
    for (int row = 0; row < n; ++row)
        for (std::size_t c = 0; c < 4; ++c) out.matrix.at(row, c) = state.matrix.at(out.permutation[row], c);
    return out;
}

double compute_reward(const PrrResult& window, double previous) {
    if (window.empty()) return previous;
    return -10.0 * (1.0 - *window.min);
}

}  // namespace vrls::agent
