#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "vrls/agent/trainer.hpp"

using namespace vrls;
using namespace vrls::agent;

namespace {

ScenarioConfig short_doca() {
    auto s = builtin_scenario(BuiltinScenario::ScdIII);
    s.geometry.length = 250.0;
    s.pool = {2, 2};
    return s;
}

// A policy whose actor ignores its input and outputs a uniform distribution.
Policy uniform_policy(std::size_t n_tbs) {
    Policy p(n_tbs);
    std::mt19937_64 rng(1);
    p.initialize(rng);
    auto& params = p.actor.parameters();
    params[params.size() - 2].fill(0.0);
    params[params.size() - 1].fill(0.0);
    return p;
}

Architecture tiny() { return {2, 3, 2, 3, 1.0}; }

TrainConfig quick_config() {
    TrainConfig c;
    c.workers = 2;
    c.epochs = 2;
    c.actions_per_epoch = 5;
    c.architecture = tiny();
    return c;
}

}  // namespace

TEST_CASE("state of the four-resource example") {
    const auto s = short_doca();
    REQUIRE(s.max_vehicles_per_direction() == 50);
    AssignmentBook book(4, s.geometry.length);
    // two forward vehicles on TB 1; the later one entered 10 s ago at 10 m/s
    book.record(1, Direction::Forward, 0, 10.0);
    book.record(1, Direction::Forward, 5000, 10.0);
    book.record(2, Direction::Backward, 12000, 20.0);
    const auto st = build_state(book, Direction::Forward, 15000, s);
    CHECK(st.matrix.shape() == nn::Shape{4, 4});
    CHECK(st.matrix.at(1, 0) == doctest::Approx(0.04));
    CHECK(st.matrix.at(1, 1) == doctest::Approx(0.4));
    CHECK(st.matrix.at(2, 2) == doctest::Approx(0.02));
    CHECK(st.matrix.at(2, 3) == doctest::Approx(60.0 / 250.0));
    for (int c = 0; c < 4; ++c) {
        CHECK(st.matrix.at(0, c) == 0.0);
        CHECK(st.matrix.at(3, c) == 0.0);
    }
    CHECK(st.subframe == std::vector<int>{0, 0, 1, 1});

    const auto flipped = build_state(book, Direction::Backward, 15000, s);
    for (int r = 0; r < 4; ++r) {
        CHECK(flipped.matrix.at(r, 0) == st.matrix.at(r, 2));
        CHECK(flipped.matrix.at(r, 1) == st.matrix.at(r, 3));
        CHECK(flipped.matrix.at(r, 2) == st.matrix.at(r, 0));
        CHECK(flipped.matrix.at(r, 3) == st.matrix.at(r, 1));
    }
}

TEST_CASE("expired assignments read as free") {
    const auto s = short_doca();
    AssignmentBook book(4, s.geometry.length);
    book.record(0, Direction::Forward, 0, 10.0);
    book.record(0, Direction::Forward, 20000, 10.0);
    // at 30 s the first vehicle is past 250 m, the second at 100 m
    auto st = build_state(book, Direction::Forward, 30000, s);
    CHECK(st.matrix.at(0, 0) == doctest::Approx(0.02));
    CHECK(st.matrix.at(0, 1) == doctest::Approx(0.4));
    CHECK(book.count(0, Direction::Forward, 25000) == 2);
    CHECK(book.count(0, Direction::Forward, 25001) == 1);
    book.expire(50000);
    st = build_state(book, Direction::Forward, 50000, s);
    CHECK(st.matrix.at(0, 0) == 0.0);
    CHECK(st.matrix.at(0, 1) == 0.0);
    // the last assignee is still known after expiry
    CHECK(book.last(0, Direction::Forward)->entry_time == 20000);
    CHECK(book.total(Direction::Forward, 50000) == 0);
    CHECK_THROWS_AS(book.record(4, Direction::Forward, 0, 1.0), std::out_of_range);
}

TEST_CASE("counts saturate at one") {
    auto s = short_doca();
    s.geometry.length = 10.0;  // two vehicles fit
    AssignmentBook book(4, s.geometry.length);
    for (int i = 0; i < 3; ++i) book.record(3, Direction::Forward, 0, 1.0);
    CHECK(build_state(book, Direction::Forward, 1000, s).matrix.at(3, 0) == 1.0);
}

TEST_CASE("shuffling moves whole subframe groups") {
    const ResourcePool pool{2, 2};
    SchedulerState st{nn::Tensor({4, 4}), {0, 0, 1, 1}};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) st.matrix.at(r, c) = r * 10 + c;
    std::mt19937_64 rng(3);
    std::set<std::vector<TbIndex>> seen;
    for (int i = 0; i < 200; ++i) {
        const auto sh = shuffle_state(st, pool, rng);
        seen.insert(sh.permutation);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) CHECK(sh.matrix.at(r, c) == st.matrix.at(sh.permutation[r], c));
    }
    CHECK(seen == std::set<std::vector<TbIndex>>{{0, 1, 2, 3}, {2, 3, 0, 1}});

    // larger pools keep every group contiguous and in subchannel order
    const ResourcePool big{5, 4};
    SchedulerState bs{nn::Tensor({20, 4}), std::vector<int>(20)};
    for (int i = 0; i < 100; ++i) {
        const auto sh = shuffle_state(bs, big, rng);
        for (int r = 0; r < 20; ++r) {
            CHECK(big.subframe_of(sh.permutation[r]) == big.subframe_of(sh.permutation[r - r % 4]));
            CHECK(big.subchannel_of(sh.permutation[r]) == r % 4);
        }
    }
    CHECK_THROWS_AS(shuffle_state(bs, pool, rng), std::invalid_argument);
}

TEST_CASE("unshuffled probabilities follow their tb") {
    const std::vector<double> shuffled{0.1, 0.2, 0.3, 0.4};
    const std::vector<TbIndex> perm{2, 3, 0, 1};
    CHECK(unshuffle(shuffled, perm) == std::vector<double>{0.3, 0.4, 0.1, 0.2});
    CHECK_THROWS_AS(unshuffle(shuffled, std::vector<TbIndex>{0, 1}), std::invalid_argument);
}

TEST_CASE("uniform actor samples every tb equally often") {
    const auto s = builtin_scenario(BuiltinScenario::ScdI);
    const auto pol = uniform_policy(20);
    SchedulerState st{nn::Tensor({20, 4}), std::vector<int>(20)};
    std::mt19937_64 rng(5);
    std::vector<int> hist(20, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++hist[act(pol, st, s.pool, rng, ActMode::Sample).tb];
    double chi2 = 0.0;
    for (int h : hist) chi2 += std::pow(h - n / 20.0, 2) / (n / 20.0);
    CHECK(chi2 < 43.82);  // 19 dof, 0.999 quantile

    // ties go to the first presented row
    for (int i = 0; i < 20; ++i) {
        const auto d = act(pol, st, s.pool, rng, ActMode::Greedy);
        CHECK(d.row == 0);
        CHECK(d.tb == d.presented.permutation[0]);
    }
}

TEST_CASE("greedy picks the most probable presented row") {
    const auto s = builtin_scenario(BuiltinScenario::ScdI);
    Policy pol(20);
    std::mt19937_64 rng(9);
    pol.initialize(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        SchedulerState st{nn::Tensor({20, 4}), std::vector<int>(20)};
        for (auto& v : st.matrix.values()) v = u(rng);
        const auto d = act(pol, st, s.pool, rng, ActMode::Greedy);
        const auto probs = actor_probabilities(pol, d.presented.matrix);
        CHECK(probs == d.shuffled_probs);
        const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
        CHECK(d.row == static_cast<std::size_t>(best));
        CHECK(d.tb == d.presented.permutation[d.row]);
        const auto tb_probs = unshuffle(probs, d.presented.permutation);
        CHECK(tb_probs[d.tb] == probs[d.row]);
    }
}

TEST_CASE("non-finite policy output is an error") {
    Policy pol(4, tiny());
    std::mt19937_64 rng(1);
    pol.initialize(rng);
    pol.actor.parameters().back()[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(actor_probabilities(pol, nn::Tensor({4, 4})), nn::NonFiniteError);
}

TEST_CASE("reward from the worst bin") {
    PrrResult r;
    CHECK(compute_reward(r, -2.5) == -2.5);
    r.per_bin = {1.0, 0.9};
    r.min = 0.9;
    CHECK(compute_reward(r, -2.5) == doctest::Approx(-1.0));
    r.min = 1.0;
    CHECK(compute_reward(r, -2.5) == 0.0);
    r.min = 0.0;
    CHECK(compute_reward(r, 0.0) == -10.0);
}

TEST_CASE("bookkeeping matches the vehicles actually inside") {
    for (auto which : {BuiltinScenario::Mcd, BuiltinScenario::McdNofade, BuiltinScenario::ScdI}) {
        const auto s = builtin_scenario(which);
        Policy pol(static_cast<std::size_t>(s.n_tbs()));
        std::mt19937_64 rng(2);
        pol.initialize(rng);
        VrlsScheduler sched(s, pol, ActMode::Sample, 3);
        Simulation sim(s, sched);
        for (TimeMs t = 250; t <= 120000; t += 250) {
            sim.advance_to(t);
            const TimeMs last = t - 1;  // the latest processed millisecond
            std::map<std::pair<Direction, TbIndex>, int> truth;
            for (const auto& v : sim.mobility().vehicles()) ++truth[{v.direction, *v.assigned_tb}];
            for (auto d : {Direction::Forward, Direction::Backward}) {
                CHECK(sched.book().total(d, last) == static_cast<int>(sim.mobility().count(d)));
                for (TbIndex tb = 0; tb < s.n_tbs(); ++tb) CHECK(sched.book().count(tb, d, last) == truth[{d, tb}]);
            }
        }
    }
}

TEST_CASE("recorded transitions carry the reward of the following window") {
    const auto s = builtin_scenario(BuiltinScenario::ScdI);
    Policy pol(20);
    std::mt19937_64 rng(2);
    pol.initialize(rng);
    VrlsScheduler sched(s, pol, ActMode::Sample, 3, true);
    Simulation sim(s, sched);
    sim.advance_to(200000);
    const auto& tr = sched.transitions();
    REQUIRE(tr.size() > 20);
    CHECK(static_cast<std::int64_t>(tr.size()) == sched.decisions());
    CHECK_FALSE(tr.back().rewarded);
    double previous = 0.0;
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
        REQUIRE(tr[i].rewarded);
        if (tr[i].window_prr) CHECK(tr[i].reward == doctest::Approx(-10.0 * (1.0 - *tr[i].window_prr)));
        else CHECK(tr[i].reward == previous);
        previous = tr[i].reward;
        CHECK(tr[i].tb == tr[i].permutation[tr[i].row]);
    }
}

TEST_CASE("scheduler and policy must agree on the pool size") {
    CHECK_THROWS_AS(VrlsScheduler(builtin_scenario(BuiltinScenario::ScdI), Policy(12, tiny()), ActMode::Greedy, 1),
                    std::invalid_argument);
}

TEST_CASE("discounted n-step returns") {
    const std::vector<double> r{1.0, 2.0, 3.0};
    CHECK(discounted_returns(r, 10.0, 0.5) == std::vector<double>{4.0, 6.0, 8.0});
    CHECK(discounted_returns(r, 10.0, 0.0) == r);
    CHECK(discounted_returns({}, 1.0, 0.9).empty());
}

TEST_CASE("trajectory gradients are the gradients of the stated losses") {
    Policy pol(4, tiny());
    std::mt19937_64 rng(12);
    pol.initialize(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Trajectory traj;
    for (int t = 0; t < 4; ++t) {
        Transition tr;
        tr.presented = nn::Tensor({4, 4});
        for (auto& v : tr.presented.values()) v = u(rng);
        tr.row = static_cast<std::size_t>(t % 4);
        tr.reward = -u(rng) * 5;
        traj.steps.push_back(tr);
    }
    traj.bootstrap = nn::Tensor({4, 4}, 0.3);
    TrainConfig cfg;
    cfg.gamma = 0.9;
    cfg.value_coef = 0.7;
    const auto g = trajectory_gradients(pol, traj, cfg);

    // advantages are frozen for the actor; returns are frozen for the critic
    std::vector<double> rewards;
    for (const auto& s : traj.steps) rewards.push_back(s.reward);
    const auto R = discounted_returns(rewards, pol.critic.forward(traj.bootstrap)[0], cfg.gamma);
    std::vector<double> adv;
    for (std::size_t t = 0; t < R.size(); ++t) adv.push_back(R[t] - pol.critic.forward(traj.steps[t].presented)[0]);

    auto actor_loss = [&] {
        double l = 0.0;
        for (std::size_t t = 0; t < R.size(); ++t) {
            const auto p = pol.actor.forward(traj.steps[t].presented);
            double h = 0.0;
            for (double q : p.values()) h -= q * std::log(q);
            l += -adv[t] * std::log(p[traj.steps[t].row]) - cfg.entropy_beta * h;
        }
        return l;
    };
    auto critic_loss = [&] {
        double l = 0.0;
        for (std::size_t t = 0; t < R.size(); ++t) {
            const double v = pol.critic.forward(traj.steps[t].presented)[0];
            l += cfg.value_coef * 0.5 * (R[t] - v) * (R[t] - v);
        }
        return l;
    };
    CHECK(g.actor_loss == doctest::Approx(actor_loss()).epsilon(1e-10));
    CHECK(g.critic_loss == doctest::Approx(critic_loss()).epsilon(1e-10));

    auto check = [](nn::Network& net, const nn::ParameterSet& grads, auto&& loss) {
        const double h = 1e-6;
        for (std::size_t t = 0; t < net.parameters().size(); ++t)
            for (std::size_t k = 0; k < net.parameters()[t].size(); ++k) {
                auto& w = net.parameters()[t][k];
                const double keep = w;
                w = keep + h;
                const double up = loss();
                w = keep - h;
                const double down = loss();
                w = keep;
                const double numeric = (up - down) / (2 * h);
                CHECK(grads[t][k] == doctest::Approx(numeric).epsilon(1e-5).scale(1e-3));
            }
    };
    check(pol.actor, g.actor, actor_loss);
    check(pol.critic, g.critic, critic_loss);
}

TEST_CASE("coordinator applies updates on the schedule") {
    Policy pol(4, tiny());
    std::mt19937_64 rng(1);
    pol.initialize(rng);
    TrainConfig cfg;
    cfg.optimizer = "sgd";
    Coordinator coord(pol, cfg, 100);
    CHECK(coord.current_lr() == nn::learning_rate(100));
    const auto before = coord.snapshot();
    Gradients g{nn::zeros_like(pol.actor.parameters()), nn::zeros_like(pol.critic.parameters())};
    g.actor.back()[0] = 1.0;
    g.critic.back()[0] = -2.0;
    const auto rec = coord.apply(g, -1.5, 0.8);
    CHECK(rec.epoch == 100);
    CHECK(rec.lr == nn::learning_rate(100));
    CHECK(rec.mean_reward == -1.5);
    CHECK(coord.epoch() == 101);
    const auto after = coord.snapshot();
    CHECK(after.actor.parameters().back()[0] == doctest::Approx(before.actor.parameters().back()[0] - rec.lr));
    CHECK(after.critic.parameters().back()[0] == doctest::Approx(before.critic.parameters().back()[0] + 2 * rec.lr));
    // the earlier snapshot is a value, untouched by the update
    CHECK(before.actor.parameters() == pol.actor.parameters());
}

TEST_CASE("synchronous training is reproducible") {
    const auto s = builtin_scenario(BuiltinScenario::ScdI);
    const auto cfg = quick_config();
    const auto a = train(s, cfg);
    const auto b = train(s, cfg);
    CHECK(a.epoch == 2);
    CHECK(a.curve.size() == 2);
    CHECK(a.policy.actor.parameters() == b.policy.actor.parameters());
    CHECK(a.policy.critic.parameters() == b.policy.critic.parameters());
    CHECK(nn::serialize(make_checkpoint(a, cfg, "scd_i")) == nn::serialize(make_checkpoint(b, cfg, "scd_i")));
    CHECK(a.policy.actor.parameters() != train(s, [&] { auto c = cfg; c.seed = 2; return c; }()).policy.actor.parameters());
}

TEST_CASE("asynchronous training applies the requested number of epochs") {
    auto cfg = quick_config();
    cfg.synchronous = false;
    cfg.epochs = 6;
    const auto r = train(builtin_scenario(BuiltinScenario::ScdI), cfg);
    CHECK(r.epoch == 6);
    CHECK(r.curve.size() == 6);
    CHECK(nn::all_finite(r.policy.actor.parameters()));
}

TEST_CASE("zero epochs leaves the initialized network") {
    auto cfg = quick_config();
    cfg.epochs = 0;
    const auto r = train(builtin_scenario(BuiltinScenario::ScdI), cfg);
    Policy fresh(20, cfg.architecture);
    std::mt19937_64 rng(derive_seed(cfg.seed, 50));
    fresh.initialize(rng);
    CHECK(r.policy.actor.parameters() == fresh.actor.parameters());
    CHECK(r.curve.empty());
}

TEST_CASE("checkpoints restore the policy and drive retraining") {
    const auto s = builtin_scenario(BuiltinScenario::McdNofade);
    const auto cfg = quick_config();
    const auto trained = train(s, cfg);
    const auto ck = nn::deserialize(nn::serialize(make_checkpoint(trained, cfg, s.name)));
    CHECK(ck.meta.at("kind") == "vrls-policy");
    CHECK(ck.meta.at("epoch") == 2);
    const auto back = policy_from_checkpoint(ck);
    CHECK(back.actor.parameters() == trained.policy.actor.parameters());
    CHECK(back.architecture() == cfg.architecture);

    auto zero = cfg;
    zero.epochs = 0;
    const auto same = retrain(ck, builtin_scenario(BuiltinScenario::Mcd), zero);
    CHECK(same.policy.actor.parameters() == trained.policy.actor.parameters());
    CHECK(same.policy.critic.parameters() == trained.policy.critic.parameters());

    const auto moved = retrain(ck, builtin_scenario(BuiltinScenario::Mcd), cfg, {false});
    CHECK(moved.epoch == 4);
    CHECK(moved.policy.actor.parameters() != trained.policy.actor.parameters());

    auto other = builtin_scenario(BuiltinScenario::ScdI);
    other.pool = {4, 2};
    CHECK_THROWS_AS(retrain(ck, other, cfg), std::invalid_argument);
}
