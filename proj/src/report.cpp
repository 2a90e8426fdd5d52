#include "vrls/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "vrls/agent/scheduler.hpp"
#include "vrls/agent/trainer.hpp"
#include "vrls/schedulers.hpp"

namespace vrls {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr std::uint64_t kSchedulerStream = 10;
constexpr TimeMs kRunLimitMs = 1'000'000'000;

}  // namespace

double percentile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile rank outside [0, 1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("summary of an empty sample");
    std::sort(samples.begin(), samples.end());
    Summary s;
    s.count = samples.size();
    s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    s.median = percentile(samples, 0.5);
    s.p1 = percentile(samples, 0.01);
    s.p25 = percentile(samples, 0.25);
    s.p75 = percentile(samples, 0.75);
    s.p99 = percentile(samples, 0.99);
    return s;
}

std::vector<std::string> scheduler_names() { return {"random", "mode4", "oracle", "vrls"}; }

std::unique_ptr<Scheduler> make_scheduler(const std::string& name, const ScenarioConfig& scenario, std::uint64_t seed,
                                          const std::optional<std::string>& checkpoint) {
    const auto s = derive_seed(seed, kSchedulerStream);
    if (name == "random") return std::make_unique<RandomScheduler>(scenario.n_tbs(), s);
    if (name == "mode4") return std::make_unique<Mode4Scheduler>(scenario.n_tbs(), s);
    if (name == "oracle") return std::make_unique<OracleScheduler>(scenario.pool);
    if (name == "vrls") {
        if (!checkpoint) throw ConfigError("checkpoint", "the vrls scheduler needs a trained checkpoint");
        if (!std::filesystem::is_regular_file(*checkpoint))
            throw ConfigError("checkpoint", "no checkpoint file at " + *checkpoint);
        auto policy = agent::policy_from_checkpoint(nn::load_checkpoint(*checkpoint));
        if (policy.n_tbs() != static_cast<std::size_t>(scenario.n_tbs()))
            throw ConfigError("checkpoint", "policy has " + std::to_string(policy.n_tbs()) + " TBs, scenario '" +
                                                scenario.name + "' has " + std::to_string(scenario.n_tbs()));
        return std::make_unique<agent::VrlsScheduler>(scenario, std::move(policy), agent::ActMode::Greedy, s);
    }
    std::string valid;
    for (const auto& n : scheduler_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("scheduler", "unknown scheduler '" + name + "' (valid: " + valid + ")");
}

std::vector<double> RunReport::bin_samples(std::size_t bin) const {
    std::vector<double> out;
    for (const auto& w : windows)
        if (auto p = w.prr().per_bin.at(bin)) out.push_back(*p);
    return out;
}

std::vector<double> RunReport::min_samples() const {
    std::vector<double> out;
    for (const auto& w : windows)
        if (auto p = w.prr().min) out.push_back(*p);
    return out;
}

std::vector<std::optional<Summary>> RunReport::bin_summaries() const {
    std::vector<std::optional<Summary>> out;
    for (std::size_t b = 0; b < bins.size(); ++b) {
        auto s = bin_samples(b);
        out.push_back(s.empty() ? std::nullopt : std::optional(summarize(std::move(s))));
    }
    return out;
}

std::optional<Summary> RunReport::min_summary() const {
    auto s = min_samples();
    if (s.empty()) return std::nullopt;
    return summarize(std::move(s));
}

int RunReport::hd_loss_windows() const {
    return static_cast<int>(std::count_if(windows.begin(), windows.end(), [](const PrrWindow& w) { return w.hd_losses > 0; }));
}

int RunReport::collision_loss_windows() const {
    return static_cast<int>(
        std::count_if(windows.begin(), windows.end(), [](const PrrWindow& w) { return w.collision_losses > 0; }));
}

double RunReport::nonzero_fraction() const {
    const auto s = min_samples();
    if (s.empty()) return 0.0;
    return static_cast<double>(std::count_if(s.begin(), s.end(), [](double p) { return p > 0.0; })) /
           static_cast<double>(s.size());
}

RunReport evaluate(const ScenarioConfig& scenario, Scheduler& scheduler, const EvalOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    Simulation sim(scenario, scheduler, {options.trace, false});
    const TimeMs window = scenario.prr_window_ms();
    while (sim.actions() < options.min_actions || sim.now() < options.min_duration_ms) {
        if (sim.now() >= kRunLimitMs) throw std::runtime_error("evaluation did not reach the requested action count");
        sim.advance_to(sim.now() + window);
    }
    sim.finish();

    RunReport r;
    r.scenario = scenario.name;
    r.scheduler = scheduler.name();
    r.seed = scenario.seed;
    r.bins = scenario.prr_bins;
    for (const auto& w : sim.windows().windows())
        if (!w.partial) r.windows.push_back(w);
    r.actions = sim.actions();
    r.transmissions = sim.transmissions();
    r.simulated_ms = sim.now();
    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

void write_windows_csv_header(std::ostream& out) {
    out << "scenario,scheduler,seed,window,start_ms,end_ms,bin_min,bin_max,successes,in_range,prr,transmissions,"
           "hd_losses,collision_losses\n";
}

void write_windows_csv(std::ostream& out, const RunReport& r) {
    for (const auto& w : r.windows) {
        for (std::size_t b = 0; b < r.bins.size(); ++b) {
            const auto& t = w.bins.at(b);
            out << r.scenario << ',' << r.scheduler << ',' << r.seed << ',' << w.index << ',' << w.start << ','
                << w.end << ',' << num(r.bins[b].min) << ',' << num(r.bins[b].max) << ',' << t.successes << ','
                << t.in_range << ',';
            if (t.in_range > 0) out << num(static_cast<double>(t.successes) / static_cast<double>(t.in_range));
            out << ',' << w.transmissions << ',' << w.hd_losses << ',' << w.collision_losses << '\n';
        }
    }
}

namespace {

void summary_block(std::ostream& out, const std::string& label, const std::optional<Summary>& s) {
    out << "series " << label << '\n';
    if (!s) {
        out << "  count 0\n";
        return;
    }
    out << "  count " << s->count << "\n  mean " << num(s->mean) << "\n  median " << num(s->median) << "\n  p1 "
        << num(s->p1) << "\n  p25 " << num(s->p25) << "\n  p75 " << num(s->p75) << "\n  p99 " << num(s->p99) << '\n';
}

}  // namespace

void write_summary(std::ostream& out, const RunReport& r) {
    out << "scenario " << r.scenario << "\nscheduler " << r.scheduler << "\nseed " << r.seed << "\nactions "
        << r.actions << "\ntransmissions " << r.transmissions << "\nsimulated_s " << num(r.simulated_ms / 1000.0)
        << "\nwindows " << r.windows.size() << "\nhd_loss_windows " << r.hd_loss_windows()
        << "\ncollision_loss_windows " << r.collision_loss_windows() << "\nnonzero_fraction "
        << num(r.nonzero_fraction()) << "\nwall_clock_s " << num(r.wall_clock_s) << '\n';
    const auto per_bin = r.bin_summaries();
    for (std::size_t b = 0; b < r.bins.size(); ++b)
        summary_block(out, "bin[" + num(r.bins[b].min) + "," + num(r.bins[b].max) + ")", per_bin[b]);
    summary_block(out, "min", r.min_summary());
}

void write_summary_csv_header(std::ostream& out) { out << "scheduler,seed,series,count,mean,median,p1,p25,p75,p99\n"; }

void write_summary_csv_row(std::ostream& out, const std::string& scheduler, const std::string& seed,
                           const std::string& series, const std::optional<Summary>& s) {
    out << scheduler << ',' << seed << ',' << series << ',';
    if (!s) {
        out << "0,,,,,,\n";
        return;
    }
    out << s->count << ',' << num(s->mean) << ',' << num(s->median) << ',' << num(s->p1) << ',' << num(s->p25) << ','
        << num(s->p75) << ',' << num(s->p99) << '\n';
}

}  // namespace vrls
