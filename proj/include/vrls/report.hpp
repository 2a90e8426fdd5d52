#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrls/simcore.hpp"

namespace vrls {

/// Box-plot quantities; percentiles interpolate linearly between order statistics.
struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p1 = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double p99 = 0.0;
};

/// q in [0, 1] over an ascending sample.
double percentile(std::span<const double> sorted, double q);
/// Throws std::invalid_argument on an empty sample.
Summary summarize(std::vector<double> samples);

std::vector<std::string> scheduler_names();

/// Builds a scheduler by name. "vrls" needs a checkpoint and runs greedily.
/// Unknown names and a missing checkpoint raise ConfigError.
std::unique_ptr<Scheduler> make_scheduler(const std::string& name, const ScenarioConfig& scenario, std::uint64_t seed,
                                          const std::optional<std::string>& checkpoint = {});

struct EvalOptions {
    std::int64_t min_actions = 1000;
    TimeMs min_duration_ms = 0;
    std::ostream* trace = nullptr;
};

struct RunReport {
    std::string scenario;
    std::string scheduler;
    std::uint64_t seed = 0;
    std::vector<RangeBin> bins;
    std::vector<PrrWindow> windows;  // full windows only
    std::int64_t actions = 0;
    std::int64_t transmissions = 0;
    TimeMs simulated_ms = 0;
    double wall_clock_s = 0.0;

    /// Per-window samples of one bin (windows where it was empty are skipped).
    std::vector<double> bin_samples(std::size_t bin) const;
    /// Per-window min over non-empty bins.
    std::vector<double> min_samples() const;
    std::vector<std::optional<Summary>> bin_summaries() const;
    std::optional<Summary> min_summary() const;
    int hd_loss_windows() const;
    int collision_loss_windows() const;
    /// Fraction of windows whose min-bin PRR is above zero.
    double nonzero_fraction() const;
};

/// Runs `scheduler` from t = 0 until at least `min_actions` DOCA entries were
/// scheduled and `min_duration_ms` elapsed, then up to the next window
/// boundary, so that every reported window is full.
RunReport evaluate(const ScenarioConfig& scenario, Scheduler& scheduler, const EvalOptions& options = {});

/// One row per (window, bin):
/// scenario,scheduler,seed,window,start_ms,end_ms,bin_min,bin_max,successes,in_range,prr,transmissions,hd_losses,collision_losses
void write_windows_csv_header(std::ostream& out);
void write_windows_csv(std::ostream& out, const RunReport& report);

/// "key value" lines, one Summary block per bin plus one for the min series.
void write_summary(std::ostream& out, const RunReport& report);

/// One line per (scheduler, seed) and per scheduler pooled over seeds:
/// scheduler,seed,series,count,mean,median,p1,p25,p75,p99
void write_summary_csv_header(std::ostream& out);
void write_summary_csv_row(std::ostream& out, const std::string& scheduler, const std::string& seed,
                           const std::string& series, const std::optional<Summary>& s);

}  // namespace vrls
