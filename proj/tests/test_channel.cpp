#include <cmath>

#include "doctest.h"
#include "vrls/channel.hpp"
#include "vrls/scenario.hpp"

using namespace vrls;

namespace {

ScenarioConfig scene(ChannelVariant v) {
    auto s = builtin_scenario(BuiltinScenario::ScdI);
    s.channel.variant = v;
    return s;
}

std::vector<RadioNode> line(int n, double spacing) {
    std::vector<RadioNode> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back({i, {i * spacing, 0.0}});
    return nodes;
}

const Reception& at(const TransmissionOutcome& o, VehicleId rx) {
    for (const auto& r : o.receptions)
        if (r.receiver == rx) return r;
    throw std::out_of_range("receiver missing");
}

}  // namespace

TEST_CASE("reception results have stable names") {
    for (auto r : {ReceptionResult::Success, ReceptionResult::HdLoss, ReceptionResult::CollisionLoss,
                   ReceptionResult::SinrLoss, ReceptionResult::OutOfRange})
        CHECK(parse_reception_result(to_string(r)) == r);
    CHECK(to_string(ReceptionResult::HdLoss) == "HD_LOSS");
    CHECK_THROWS(parse_reception_result("LOST"));
}

TEST_CASE("scd: two subchannels of one subframe reach the eight listeners") {
    Channel ch(scene(ChannelVariant::Scd), 1);
    const auto nodes = line(10, 10.0);
    const std::vector<Transmission> txs{{0, 4, nodes[0].pos}, {1, 5, nodes[1].pos}};
    const auto out = ch.resolve_subframe(0, txs, nodes);
    REQUIRE(out.size() == 2);
    for (const auto& o : out) {
        CHECK(o.receptions.size() == 9);
        int ok = 0;
        for (const auto& r : o.receptions) {
            CHECK(r.receiver != o.tx);
            ok += r.result == ReceptionResult::Success;
        }
        CHECK(ok == 8);
        CHECK(at(o, o.tx == 0 ? 1 : 0).result == ReceptionResult::HdLoss);
    }
}

TEST_CASE("scd: a shared tb loses both messages everywhere") {
    Channel ch(scene(ChannelVariant::Scd), 1);
    const auto nodes = line(10, 10.0);
    const std::vector<Transmission> txs{{0, 6, nodes[0].pos}, {7, 6, nodes[7].pos}};
    for (const auto& o : ch.resolve_subframe(0, txs, nodes))
        for (const auto& r : o.receptions) CHECK(r.result != ReceptionResult::Success);
}

TEST_CASE("mixed subframes and foreign tbs are contract violations") {
    Channel ch(scene(ChannelVariant::Scd), 1);
    const auto nodes = line(3, 10.0);
    CHECK_THROWS_AS(ch.resolve_subframe(0, std::vector<Transmission>{{0, 0, {}}, {1, 2, {}}}, nodes), std::logic_error);
    CHECK_THROWS_AS(ch.resolve_subframe(0, std::vector<Transmission>{{0, 20, {}}}, nodes), std::logic_error);
}

TEST_CASE("mcd range: disc boundary and protocol-model interference") {
    auto s = scene(ChannelVariant::McdRange);
    s.channel.range = 120.0;
    Channel ch(s, 1);
    std::vector<RadioNode> nodes{{0, {0, 0}}, {1, {130, 0}}, {2, {119, 0}}, {3, {300, 0}}, {4, {60, 0}}};

    auto out = ch.resolve_subframe(0, std::vector<Transmission>{{0, 0, nodes[0].pos}}, nodes);
    CHECK(at(out[0], 1).result == ReceptionResult::OutOfRange);
    CHECK(at(out[0], 2).result == ReceptionResult::Success);
    CHECK(at(out[0], 4).result == ReceptionResult::Success);

    // interferer at 300 m is 181 m from node 2 and 240 m from node 4: harmless
    out = ch.resolve_subframe(0, std::vector<Transmission>{{0, 0, nodes[0].pos}, {3, 0, nodes[3].pos}}, nodes);
    CHECK(at(out[0], 2).result == ReceptionResult::Success);
    CHECK(at(out[0], 4).result == ReceptionResult::Success);

    // interferer at 130 m is within range of node 2 (11 m) and node 4 (70 m)
    out = ch.resolve_subframe(0, std::vector<Transmission>{{0, 0, nodes[0].pos}, {1, 0, nodes[1].pos}}, nodes);
    CHECK(at(out[0], 2).result == ReceptionResult::CollisionLoss);
    CHECK(at(out[0], 4).result == ReceptionResult::CollisionLoss);
}

TEST_CASE("scd equals mcd range with a range covering the whole doca") {
    auto wide = scene(ChannelVariant::McdRange);
    wide.channel.range = 1000.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> x(0.0, 500.0);
    for (int trial = 0; trial < 300; ++trial) {
        Channel scd(scene(ChannelVariant::Scd), 1), mcd(wide, 1);
        std::vector<RadioNode> nodes;
        for (int i = 0; i < 8; ++i) nodes.push_back({i, {x(rng), (rng() % 2) * 4.0}});
        const int sf = static_cast<int>(rng() % 10);
        std::vector<Transmission> txs;
        for (int i = 0; i < 8; ++i)
            if (rng() % 3 == 0) txs.push_back({i, sf * 2 + static_cast<int>(rng() % 2), nodes[i].pos});
        const auto a = scd.resolve_subframe(0, txs, nodes);
        const auto b = mcd.resolve_subframe(0, txs, nodes);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t r = 0; r < a[k].receptions.size(); ++r)
                CHECK(a[k].receptions[r].result == b[k].receptions[r].result);
    }
}

TEST_CASE("half duplex holds under every variant") {
    for (auto v : {ChannelVariant::Scd, ChannelVariant::McdRange, ChannelVariant::McdSinr}) {
        auto s = scene(v);
        s.channel.tx_power_dbm = 23.0;
        Channel ch(s, 4);
        const auto nodes = line(6, 5.0);
        const std::vector<Transmission> txs{{0, 0, nodes[0].pos}, {3, 1, nodes[3].pos}};
        for (const auto& o : ch.resolve_subframe(0, txs, nodes)) {
            const VehicleId other = o.tx == 0 ? 3 : 0;
            CHECK(at(o, other).result == ReceptionResult::HdLoss);
        }
    }
}

TEST_CASE("pathloss: clamp below 3 m, monotone, continuous fallback") {
    ChannelConfig c;
    CHECK(winner_b1_los_db(1.0, 6.0, 1.5, 3.0) == winner_b1_los_db(3.0, 6.0, 1.5, 3.0));
    CHECK(pathloss_db(1.0, c) == pathloss_db(3.0, c));
    double prev = pathloss_db(0.0, c);
    for (double d = 0.5; d < 2000.0; d += 0.5) {
        const double pl = pathloss_db(d, c);
        CHECK(pl >= prev - 1e-12);
        prev = pl;
    }
    CHECK(pathloss_db(100, c) >= pathloss_db(50, c));

    // below the breakpoint: 22.7 log10(d) + 41 + 20 log10(fc / 5)
    CHECK(winner_b1_los_db(10.0, 5.0, 1.5, 3.0) == doctest::Approx(22.7 + 41.0));

    ChannelConfig ld = c;
    ld.pathloss = PathlossKind::LogDistance;
    ld.log_distance_exponent = 2.7;
    CHECK(pathloss_db(3.0, ld) == doctest::Approx(pathloss_db(3.0, c)));
    CHECK(pathloss_db(3.0 + 1e-9, ld) == doctest::Approx(pathloss_db(3.0, ld)));
    CHECK(pathloss_db(30.0, ld) == doctest::Approx(pathloss_db(3.0, ld) + 27.0));
}

TEST_CASE("sinr threshold calibration gives the target median range") {
    auto s = builtin_scenario(BuiltinScenario::Mcd);
    s.channel.shadowing_sigma_db = 0.0;
    s.channel.sinr_threshold_db = calibrate_sinr_threshold(s.channel, 120.0);
    Channel ch(s, 1);
    std::vector<RadioNode> nodes{{0, {0, 0}}, {1, {119.0, 0}}, {2, {121.0, 0}}};
    const auto out = ch.resolve_subframe(0, std::vector<Transmission>{{0, 0, nodes[0].pos}}, nodes);
    CHECK(at(out[0], 1).result == ReceptionResult::Success);
    CHECK(at(out[0], 2).result == ReceptionResult::SinrLoss);
}

TEST_CASE("shadowing: symmetric, sticky at zero displacement, fresh at large displacement") {
    ShadowingField f(3.0, 25.0);
    std::mt19937_64 rng(1);
    const double first = f.sample(1, 2, 10.0, rng);
    CHECK(f.value(2, 1) == first);
    const auto state = rng;
    CHECK(f.sample(2, 1, 10.0, rng) == first);
    CHECK(rng == state);  // no randomness consumed

    // rho = exp(-1e6 / 25) is 0: the update is uncorrelated with the old value
    ShadowingField g(3.0, 25.0);
    const int n = 20000;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = g.sample(2 * i, 2 * i + 1, 0.0, rng);
        const double y = g.sample(2 * i, 2 * i + 1, 1e6, rng);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(syy / n == doctest::Approx(9.0).epsilon(0.05));

    f.forget(1);
    CHECK_FALSE(f.value(1, 2).has_value());
    CHECK(f.size() == 0);
}

TEST_CASE("shadowing keeps a stationary variance of sigma squared") {
    ShadowingField f(3.0, 25.0);
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> step(0.0, 20.0);
    double sep = 50.0, sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        sep += step(rng);
        const double v = f.sample(1, 2, sep, rng);
        sum += v;
        sum2 += v * v;
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    // correlated samples: rho ~ exp(-10/25) = 0.67 inflates the variance of
    // the estimator by (1 + rho^2) / (1 - rho^2) ~ 2.6
    const double se = 9.0 * std::sqrt(2.0 / n * 2.6);
    CHECK(std::abs(var - 9.0) < 3.0 * se);
}

TEST_CASE("sinr: interferers sum and shadowing draws are seed-deterministic") {
    auto s = builtin_scenario(BuiltinScenario::Mcd);
    auto run = [&](std::uint64_t seed) {
        Channel ch(s, seed);
        const auto nodes = line(12, 17.0);
        std::vector<ReceptionResult> results;
        for (TimeMs t = 0; t < 50; ++t) {
            const std::vector<Transmission> txs{{0, 0, nodes[0].pos}, {11, 0, nodes[11].pos}};
            for (const auto& o : ch.resolve_subframe(t, txs, nodes))
                for (const auto& r : o.receptions) results.push_back(r.result);
        }
        return results;
    };
    CHECK(run(3) == run(3));
}
