#pragma once

#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "vrls/mobility.hpp"
#include "vrls/nn/tensor.hpp"
#include "vrls/scenario.hpp"
#include "vrls/simcore.hpp"

namespace vrls::agent {

/// What the scheduler remembers about its own past assignments. It receives
/// no feedback from inside the DOCA, so an assignment is forgotten once the
/// assignee's estimated travelled distance exceeds the DOCA length.
class AssignmentBook {
public:
    struct Entry {
        TimeMs entry_time = 0;
        double speed = 0.0;
    };

    AssignmentBook(int n_tbs, double doca_length);

    void record(TbIndex tb, Direction d, TimeMs entry_time, double speed);
    /// Drops every assignment whose estimated travelled distance exceeds the DOCA length at `now`.
    void expire(TimeMs now);

    /// Non-expired assignments of `tb` in direction `d` at `now`.
    int count(TbIndex tb, Direction d, TimeMs now) const;
    int total(Direction d, TimeMs now) const;
    /// Most recent assignee of `tb` in direction `d`, expired or not.
    std::optional<Entry> last(TbIndex tb, Direction d) const;

    double travelled(const Entry& e, TimeMs now) const;
    int n_tbs() const { return n_tbs_; }
    double doca_length() const { return length_; }

private:
    struct Slot {
        std::deque<Entry> live;
        std::optional<Entry> last;
    };
    Slot& slot(TbIndex tb, Direction d) { return slots_[static_cast<std::size_t>(tb) * 2 + index_of(d)]; }
    const Slot& slot(TbIndex tb, Direction d) const { return slots_[static_cast<std::size_t>(tb) * 2 + index_of(d)]; }
    bool expired(const Entry& e, TimeMs now) const { return travelled(e, now) > length_; }

    int n_tbs_;
    double length_;
    std::vector<Slot> slots_;
};

/// Observation: n_tbs x 4 matrix in [0, 1], rows in TB order.
///   col 0: same-direction assignment count / max vehicles per direction
///   col 1: same-direction last assignee's travelled distance / DOCA length
///   col 2, 3: the same for the opposite direction
/// "Same" is relative to the entering vehicle.
struct SchedulerState {
    nn::Tensor matrix;
    std::vector<int> subframe;  // group label of every row
};

SchedulerState build_state(const AssignmentBook& book, Direction entrant, TimeMs now, const ScenarioConfig& scenario);

struct ShuffledState {
    nn::Tensor matrix;
    std::vector<TbIndex> permutation;  // shuffled row -> original TB
};

/// Permutes whole subframe groups uniformly at random; rows inside a group
/// keep their subchannel order.
ShuffledState shuffle_state(const SchedulerState& state, const ResourcePool& pool, std::mt19937_64& rng);

/// -10 * (1 - min PRR over non-empty bins); repeats `previous` when nothing
/// was transmitted in the window.
double compute_reward(const PrrResult& window, double previous);

}  // namespace vrls::agent
