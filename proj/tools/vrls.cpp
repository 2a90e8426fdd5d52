// vrls: train, evaluate and compare TB schedulers for out-of-coverage V2X.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error,
// 3 a --require-* threshold was not met.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vrls/agent/trainer.hpp"
#include "vrls/report.hpp"
#include "vrls/scenario.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kThreshold = 3 };

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

struct TrainArgs {
    std::string scenario;
    std::int64_t epochs = 500;
    int workers = 16;
    bool sync = false;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<std::string> checkpoint;
    std::optional<std::string> from;
    bool resume_schedule = false;
    int actions_per_epoch = 60;
    double gamma = vrls::agent::TrainConfig{}.gamma;
    double beta = vrls::agent::TrainConfig{}.entropy_beta;
    std::string optimizer = "rmsprop";
};

struct EvalArgs {
    std::string scenario;
    std::string scheduler = "random";
    std::optional<std::string> checkpoint;
    std::optional<std::uint64_t> seed;
    double duration_s = 0.0;
    std::int64_t min_actions = 1000;
    std::string out = ".";
    std::optional<std::string> trace;
    std::optional<double> require_mean;
    std::optional<double> require_median;
    std::optional<double> require_nonzero;
    std::optional<double> max_collision_windows;
};

struct CompareArgs {
    std::string scenario;
    std::vector<std::string> schedulers = {"random", "mode4"};
    std::vector<std::uint64_t> seeds = {1};
    std::optional<std::string> checkpoint;
    double duration_s = 0.0;
    std::int64_t min_actions = 1000;
    std::string out = ".";
};

int cmd_train(const TrainArgs& a) {
    auto scenario = vrls::load_scenario(a.scenario);
    vrls::agent::TrainConfig c;
    c.workers = a.workers;
    c.epochs = a.epochs;
    c.synchronous = a.sync;
    c.seed = a.seed.value_or(scenario.seed);
    c.actions_per_epoch = a.actions_per_epoch;
    c.gamma = a.gamma;
    c.entropy_beta = a.beta;
    c.optimizer = a.optimizer;

    const fs::path out_dir(a.out);
    auto curve = open_out(out_dir / "curve.jsonl");
    vrls::agent::TrainHooks hooks;
    hooks.log = &std::cerr;
    hooks.on_epoch = [&](const vrls::agent::EpochRecord& r) {
        curve << vrls::agent::to_json(r).dump() << '\n';
        curve.flush();
        if (r.epoch % 10 == 0)
            std::cerr << "epoch " << r.epoch << " reward " << r.mean_reward << " prr " << r.mean_prr << " lr " << r.lr
                      << '\n';
    };

    vrls::agent::TrainResult result = [&] {
        if (a.from) {
            if (!fs::is_regular_file(*a.from)) throw vrls::ConfigError("from", "no checkpoint file at " + *a.from);
            const auto ck = vrls::nn::load_checkpoint(*a.from);
            const auto n = vrls::agent::policy_from_checkpoint(ck).n_tbs();
            if (n != static_cast<std::size_t>(scenario.n_tbs()))
                throw vrls::ConfigError("from", "checkpoint policy has " + std::to_string(n) + " TBs, scenario '" +
                                                    scenario.name + "' has " + std::to_string(scenario.n_tbs()));
            return vrls::agent::retrain(ck, scenario, c, {!a.resume_schedule}, hooks);
        }
        return vrls::agent::train(scenario, c, std::nullopt, 0, hooks);
    }();

    const fs::path ck_path = a.checkpoint ? fs::path(*a.checkpoint) : out_dir / "policy.ckpt";
    if (ck_path.has_parent_path()) fs::create_directories(ck_path.parent_path());
    vrls::nn::save_checkpoint(vrls::agent::make_checkpoint(result, c, scenario.name), ck_path.string());
    std::cout << "trained " << scenario.name << " to epoch " << result.epoch << "; checkpoint " << ck_path.string()
              << '\n';
    for (const auto& f : result.worker_failures) std::cout << f << '\n';
    return kOk;
}

int cmd_eval(const EvalArgs& a) {
    auto scenario = vrls::load_scenario(a.scenario);
    if (a.seed) scenario.seed = *a.seed;
    auto scheduler = vrls::make_scheduler(a.scheduler, scenario, scenario.seed, a.checkpoint);

    std::optional<std::ofstream> trace;
    if (a.trace) trace = open_out(*a.trace);
    vrls::EvalOptions opt;
    opt.min_actions = a.min_actions;
    opt.min_duration_ms = static_cast<vrls::TimeMs>(a.duration_s * 1000.0);
    opt.trace = trace ? &*trace : nullptr;
    const auto report = vrls::evaluate(scenario, *scheduler, opt);

    const fs::path out_dir(a.out);
    {
        auto csv = open_out(out_dir / "windows.csv");
        vrls::write_windows_csv_header(csv);
        vrls::write_windows_csv(csv, report);
        auto txt = open_out(out_dir / "summary.txt");
        vrls::write_summary(txt, report);
    }
    vrls::write_summary(std::cout, report);

    int code = kOk;
    const auto s = report.min_summary();
    auto require = [&](const char* what, double got, double want, bool at_least) {
        if (at_least ? got >= want : got <= want) return;
        std::cerr << "threshold failed: " << what << " = " << got << (at_least ? " < " : " > ") << want << '\n';
        code = kThreshold;
    };
    if (a.require_mean) require("mean PRR", s ? s->mean : 0.0, *a.require_mean, true);
    if (a.require_median) require("median PRR", s ? s->median : 0.0, *a.require_median, true);
    if (a.require_nonzero) require("non-zero PRR fraction", report.nonzero_fraction(), *a.require_nonzero, true);
    if (a.max_collision_windows) {
        const double frac = report.windows.empty()
                                ? 1.0
                                : static_cast<double>(report.collision_loss_windows()) / report.windows.size();
        require("collision window fraction", frac, *a.max_collision_windows, false);
    }
    return code;
}

int cmd_compare(const CompareArgs& a) {
    const auto base = vrls::load_scenario(a.scenario);
    const fs::path out_dir(a.out);
    auto windows = open_out(out_dir / "compare_windows.csv");
    auto summary = open_out(out_dir / "compare_summary.csv");
    vrls::write_windows_csv_header(windows);
    vrls::write_summary_csv_header(summary);

    int code = kOk;
    for (const auto& name : a.schedulers) {
        std::vector<double> pooled;
        bool failed = false;
        for (auto seed : a.seeds) {
            try {
                auto scenario = base;
                scenario.seed = seed;
                auto scheduler = vrls::make_scheduler(name, scenario, seed, a.checkpoint);
                vrls::EvalOptions opt;
                opt.min_actions = a.min_actions;
                opt.min_duration_ms = static_cast<vrls::TimeMs>(a.duration_s * 1000.0);
                const auto report = vrls::evaluate(scenario, *scheduler, opt);
                vrls::write_windows_csv(windows, report);
                const auto s = report.min_samples();
                pooled.insert(pooled.end(), s.begin(), s.end());
                vrls::write_summary_csv_row(summary, name, std::to_string(seed), "min", report.min_summary());
            } catch (const std::exception& e) {
                std::cerr << name << " (seed " << seed << ") failed: " << e.what() << '\n';
                failed = true;
                code = std::max<int>(code, dynamic_cast<const vrls::ConfigError*>(&e) ? kConfig : kRuntime);
            }
        }
        if (!pooled.empty()) {
            const auto s = vrls::summarize(pooled);
            vrls::write_summary_csv_row(summary, name, "all", "min", s);
            std::cout << name << " mean " << s.mean << " median " << s.median << " windows " << s.count
                      << (failed ? " (partial)" : "") << '\n';
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive TB scheduling for out-of-coverage V2X"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a VRLS policy");
    train->add_option("--scenario", ta.scenario, "builtin name or JSON file")->required()->envname("VRLS_SCENARIO");
    train->add_option("--epochs", ta.epochs)->envname("VRLS_EPOCHS")->check(CLI::NonNegativeNumber);
    train->add_option("--workers", ta.workers)->envname("VRLS_WORKERS")->check(CLI::PositiveNumber);
    train->add_flag("--sync", ta.sync, "deterministic lockstep workers")->envname("VRLS_SYNC");
    train->add_option("--seed", ta.seed)->envname("VRLS_SEED");
    train->add_option("--out", ta.out, "output directory")->envname("VRLS_OUT");
    train->add_option("--checkpoint", ta.checkpoint, "checkpoint path (default <out>/policy.ckpt)")
        ->envname("VRLS_CHECKPOINT");
    train->add_option("--from", ta.from, "retrain this checkpoint")->envname("VRLS_FROM");
    train->add_flag("--resume-schedule", ta.resume_schedule, "continue the learning-rate schedule of --from")
        ->envname("VRLS_RESUME_SCHEDULE");
    train->add_option("--actions-per-epoch", ta.actions_per_epoch)->envname("VRLS_ACTIONS_PER_EPOCH");
    train->add_option("--gamma", ta.gamma)->envname("VRLS_GAMMA");
    train->add_option("--beta", ta.beta, "entropy weight")->envname("VRLS_BETA");
    train->add_option("--optimizer", ta.optimizer)->envname("VRLS_OPTIMIZER")->check(CLI::IsMember({"rmsprop", "sgd"}));

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "evaluate one scheduler");
    eval->add_option("--scenario", ea.scenario)->required()->envname("VRLS_SCENARIO");
    eval->add_option("--scheduler", ea.scheduler, "random | mode4 | oracle | vrls")->envname("VRLS_SCHEDULER");
    eval->add_option("--checkpoint", ea.checkpoint)->envname("VRLS_CHECKPOINT");
    eval->add_option("--seed", ea.seed)->envname("VRLS_SEED");
    eval->add_option("--duration", ea.duration_s, "minimum simulated seconds")->envname("VRLS_DURATION");
    eval->add_option("--min-actions", ea.min_actions)->envname("VRLS_MIN_ACTIONS");
    eval->add_option("--out", ea.out)->envname("VRLS_OUT");
    eval->add_option("--trace", ea.trace, "per-reception CSV trace")->envname("VRLS_TRACE");
    eval->add_option("--require-mean-prr", ea.require_mean)->envname("VRLS_REQUIRE_MEAN_PRR");
    eval->add_option("--require-median-prr", ea.require_median)->envname("VRLS_REQUIRE_MEDIAN_PRR");
    eval->add_option("--require-nonzero-fraction", ea.require_nonzero)->envname("VRLS_REQUIRE_NONZERO_FRACTION");
    eval->add_option("--max-collision-window-fraction", ea.max_collision_windows)
        ->envname("VRLS_MAX_COLLISION_WINDOW_FRACTION");

    CompareArgs ca;
    auto* compare = app.add_subcommand("compare", "evaluate several schedulers over several seeds");
    compare->add_option("--scenario", ca.scenario)->required()->envname("VRLS_SCENARIO");
    compare->add_option("--scheduler,--schedulers", ca.schedulers)->delimiter(',')->envname("VRLS_SCHEDULER");
    compare->add_option("--seed,--seeds", ca.seeds)->delimiter(',')->envname("VRLS_SEED");
    compare->add_option("--checkpoint", ca.checkpoint)->envname("VRLS_CHECKPOINT");
    compare->add_option("--duration", ca.duration_s)->envname("VRLS_DURATION");
    compare->add_option("--min-actions", ca.min_actions)->envname("VRLS_MIN_ACTIONS");
    compare->add_option("--out", ca.out)->envname("VRLS_OUT");

    std::string show;
    auto* scenario = app.add_subcommand("scenario", "print a resolved scenario as JSON");
    scenario->add_option("--scenario", show, "builtin name or JSON file")->required()->envname("VRLS_SCENARIO");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*train) return cmd_train(ta);
        if (*eval) return cmd_eval(ea);
        if (*scenario) {
            std::cout << vrls::to_json(vrls::load_scenario(show)).dump(2) << '\n';
            return kOk;
        }
        return cmd_compare(ca);
    } catch (const vrls::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
