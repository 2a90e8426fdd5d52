#include "vrls/agent/trainer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <future>
#include <limits>
#include <ostream>
#include <thread>

namespace vrls::agent {

using nlohmann::json;

json to_json(const TrainConfig& c) {
    return {{"workers", c.workers},
            {"epochs", c.epochs},
            {"actions_per_epoch", c.actions_per_epoch},
            {"gamma", c.gamma},
            {"entropy_beta", c.entropy_beta},
            {"value_coef", c.value_coef},
            {"synchronous", c.synchronous},
            {"optimizer", c.optimizer},
            {"lr_base", c.lr_base},
            {"lr_decay", c.lr_decay},
            {"lr_power", c.lr_power},
            {"seed", c.seed},
            {"architecture", to_json(c.architecture)}};
}

json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch}, {"mean_reward", r.mean_reward}, {"mean_prr", r.mean_prr}, {"lr", r.lr}};
}

double Trajectory::mean_reward() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& t : steps) s += t.reward;
    return s / static_cast<double>(steps.size());
}

std::optional<double> Trajectory::mean_prr() const {
    double s = 0.0;
    int n = 0;
    for (const auto& t : steps)
        if (t.window_prr) {
            s += *t.window_prr;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return s / n;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double bootstrap_value, double gamma) {
    std::vector<double> out(rewards.size());
    double r = bootstrap_value;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        r = rewards[i] + gamma * r;
        out[i] = r;
    }
    return out;
}

Gradients trajectory_gradients(const Policy& policy, const Trajectory& trajectory, const TrainConfig& config) {
    Gradients g{nn::zeros_like(policy.actor.parameters()), nn::zeros_like(policy.critic.parameters())};
    if (trajectory.steps.empty()) return g;

    std::vector<double> rewards;
    rewards.reserve(trajectory.steps.size());
    for (const auto& s : trajectory.steps) rewards.push_back(s.reward);
    const double bootstrap = policy.critic.forward(trajectory.bootstrap)[0];
    const auto returns = discounted_returns(rewards, bootstrap, config.gamma);

    constexpr double tiny = std::numeric_limits<double>::min();
    for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
        const auto& step = trajectory.steps[t];

        nn::ForwardCache cc;
        const double v = policy.critic.forward(step.presented, cc)[0];
        const double adv = returns[t] - v;
        g.critic_loss += config.value_coef * 0.5 * adv * adv;
        nn::add_into(g.critic, policy.critic.backward(cc, nn::Tensor(policy.critic.output_shape(), -config.value_coef * adv)));

        nn::ForwardCache ac;
        const auto p = policy.actor.forward(step.presented, ac);
        nn::Tensor grad(p.shape());
        double entropy = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double logp = std::log(std::max(p[i], tiny));
            entropy -= p[i] * logp;
            grad[i] = config.entropy_beta * (logp + 1.0);
        }
        const double pa = std::max(p[step.row], tiny);
        grad[step.row] -= adv / pa;
        g.actor_loss += -adv * std::log(pa) - config.entropy_beta * entropy;
        nn::add_into(g.actor, policy.actor.backward(ac, grad));
    }
    if (!std::isfinite(g.actor_loss) || !std::isfinite(g.critic_loss))
        throw nn::NonFiniteError("non-finite training loss");
    return g;
}

Coordinator::Coordinator(Policy initial, const TrainConfig& config, std::int64_t start_epoch)
    : global_(std::move(initial)),
      config_(config),
      actor_opt_(nn::make_optimizer(config.optimizer)),
      critic_opt_(nn::make_optimizer(config.optimizer)),
      epoch_(start_epoch) {}

Policy Coordinator::snapshot() const {
    std::lock_guard lock(mutex_);
    return global_;
}

std::int64_t Coordinator::epoch() const {
    std::lock_guard lock(mutex_);
    return epoch_;
}

double Coordinator::current_lr() const {
    std::lock_guard lock(mutex_);
    return nn::learning_rate(epoch_, config_.lr_base, config_.lr_decay, config_.lr_power);
}

EpochRecord Coordinator::apply(const Gradients& g, double mean_reward, double mean_prr) {
    std::lock_guard lock(mutex_);
    const double lr = nn::learning_rate(epoch_, config_.lr_base, config_.lr_decay, config_.lr_power);
    // check both before touching either network
    if (!nn::all_finite(g.actor) || !nn::all_finite(g.critic)) throw nn::NonFiniteError("non-finite gradient");
    actor_opt_->step(global_.actor.parameters(), g.actor, lr);
    critic_opt_->step(global_.critic.parameters(), g.critic, lr);
    return {epoch_++, mean_reward, mean_prr, lr};
}

nn::ParameterSet Coordinator::actor_optimizer_state() const {
    std::lock_guard lock(mutex_);
    return actor_opt_->state();
}

nn::ParameterSet Coordinator::critic_optimizer_state() const {
    std::lock_guard lock(mutex_);
    return critic_opt_->state();
}

void Coordinator::set_optimizer_state(const nn::ParameterSet& actor, const nn::ParameterSet& critic) {
    std::lock_guard lock(mutex_);
    actor_opt_->set_state(actor);
    critic_opt_->set_state(critic);
}

namespace {

ScenarioConfig reseeded(ScenarioConfig s, std::uint64_t seed) {
    s.seed = seed;
    return s;
}

// Simulated time a worker may spend without completing a trajectory.
constexpr TimeMs kStallLimitMs = 100'000'000;

}  // namespace

Worker::Worker(const ScenarioConfig& scenario, const Policy& policy, int index, std::uint64_t seed)
    : index_(index),
      scenario_(reseeded(scenario, derive_seed(seed, 100 + static_cast<std::uint64_t>(index)))),
      scheduler_(scenario_, policy, ActMode::Sample, derive_seed(seed, 200 + static_cast<std::uint64_t>(index)), true),
      sim_(scenario_, scheduler_) {}

Trajectory Worker::collect(const Policy& snapshot, int actions) {
    scheduler_.set_policy(snapshot);
    auto& pending = scheduler_.transitions();
    const TimeMs start = sim_.now();
    const auto needed = static_cast<std::size_t>(actions) + 1;
    while (pending.size() < needed) {
        if (sim_.now() - start > kStallLimitMs) throw std::runtime_error("worker stalled: no DOCA entries");
        sim_.advance_to(sim_.now() + 100);
    }
    Trajectory t;
    t.steps.assign(std::make_move_iterator(pending.begin()), std::make_move_iterator(pending.begin() + actions));
    pending.erase(pending.begin(), pending.begin() + actions);
    t.bootstrap = pending.front().presented;
    return t;
}

namespace {

struct Rollout {
    Gradients gradients;
    double mean_reward = 0.0;
    std::optional<double> mean_prr;
};

Rollout rollout(Worker& w, const Policy& snapshot, const TrainConfig& config) {
    auto traj = w.collect(snapshot, config.actions_per_epoch);
    return {trajectory_gradients(snapshot, traj, config), traj.mean_reward(), traj.mean_prr()};
}

void log_failure(TrainHooks& hooks, TrainResult& result, int index, const std::exception& e) {
    std::string msg = "worker " + std::to_string(index) + " died: " + e.what();
    if (hooks.log) *hooks.log << msg << '\n';
    result.worker_failures.push_back(std::move(msg));
}

void record(TrainHooks& hooks, TrainResult& result, const EpochRecord& r) {
    result.curve.push_back(r);
    if (hooks.on_epoch) hooks.on_epoch(r);
}

void train_sync(std::vector<std::unique_ptr<Worker>>& workers, Coordinator& coord, const TrainConfig& config,
                TrainHooks& hooks, TrainResult& result) {
    for (std::int64_t e = 0; e < config.epochs; ++e) {
        const Policy snapshot = coord.snapshot();
        std::vector<std::future<Rollout>> futures;
        futures.reserve(workers.size());
        for (auto& w : workers)
            futures.push_back(std::async(std::launch::async, [&w, &snapshot, &config] { return rollout(*w, snapshot, config); }));

        std::optional<Gradients> sum;
        double reward = 0.0, prr = 0.0;
        int n = 0, n_prr = 0;
        std::vector<std::unique_ptr<Worker>> alive;
        for (std::size_t i = 0; i < futures.size(); ++i) {
            try {
                auto r = futures[i].get();
                if (!sum) {
                    sum = std::move(r.gradients);
                } else {
                    nn::add_into(sum->actor, r.gradients.actor);
                    nn::add_into(sum->critic, r.gradients.critic);
                }
                reward += r.mean_reward;
                if (r.mean_prr) {
                    prr += *r.mean_prr;
                    ++n_prr;
                }
                ++n;
                alive.push_back(std::move(workers[i]));
            } catch (const nn::NonFiniteError&) {
                throw;
            } catch (const std::exception& ex) {
                log_failure(hooks, result, workers[i]->index(), ex);
            }
        }
        workers = std::move(alive);
        if (n == 0) throw std::runtime_error("every training worker died");
        nn::scale(sum->actor, 1.0 / n);
        nn::scale(sum->critic, 1.0 / n);
        record(hooks, result, coord.apply(*sum, reward / n, n_prr ? prr / n_prr : 0.0));
    }
}

void train_async(std::vector<std::unique_ptr<Worker>>& workers, Coordinator& coord, const TrainConfig& config,
                 TrainHooks& hooks, TrainResult& result) {
    const std::int64_t target = coord.epoch() + config.epochs;
    std::mutex apply_mutex;
    std::atomic<bool> stop{false};
    std::exception_ptr fatal;
    std::atomic<int> alive{static_cast<int>(workers.size())};

    auto body = [&](Worker& w) {
        try {
            while (!stop) {
                const Policy snapshot = coord.snapshot();
                auto r = rollout(w, snapshot, config);
                std::lock_guard lock(apply_mutex);
                if (stop || coord.epoch() >= target) break;
                record(hooks, result, coord.apply(r.gradients, r.mean_reward, r.mean_prr.value_or(0.0)));
                if (coord.epoch() >= target) stop = true;
            }
        } catch (const nn::NonFiniteError&) {
            std::lock_guard lock(apply_mutex);
            if (!fatal) fatal = std::current_exception();
            stop = true;
        } catch (const std::exception& ex) {
            std::lock_guard lock(apply_mutex);
            log_failure(hooks, result, w.index(), ex);
            if (--alive == 0 && !fatal) {
                fatal = std::make_exception_ptr(std::runtime_error("every training worker died"));
                stop = true;
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        for (auto& w : workers) threads.emplace_back(body, std::ref(*w));
    }
    if (fatal) std::rethrow_exception(fatal);
}

TrainResult run(const ScenarioConfig& scenario, const TrainConfig& config, Policy initial, std::int64_t start_epoch,
                const nn::ParameterSet* actor_state, const nn::ParameterSet* critic_state, TrainHooks hooks) {
    validate(scenario);
    if (config.workers < 1) throw std::invalid_argument("at least one worker is required");
    if (config.actions_per_epoch < 1) throw std::invalid_argument("actions_per_epoch must be positive");
    if (config.epochs < 0) throw std::invalid_argument("epochs must be non-negative");

    Coordinator coord(std::move(initial), config, start_epoch);
    if (actor_state && critic_state) coord.set_optimizer_state(*actor_state, *critic_state);

    TrainResult result{coord.snapshot()};
    if (config.epochs > 0) {
        std::vector<std::unique_ptr<Worker>> workers;
        for (int i = 0; i < config.workers; ++i)
            workers.push_back(std::make_unique<Worker>(scenario, result.policy, i, config.seed));
        if (config.synchronous)
            train_sync(workers, coord, config, hooks, result);
        else
            train_async(workers, coord, config, hooks, result);
        result.policy = coord.snapshot();
    }
    result.epoch = coord.epoch();
    result.actor_optimizer_state = coord.actor_optimizer_state();
    result.critic_optimizer_state = coord.critic_optimizer_state();
    return result;
}

}  // namespace

TrainResult train(const ScenarioConfig& scenario, const TrainConfig& config, std::optional<Policy> initial,
                  std::int64_t start_epoch, TrainHooks hooks) {
    if (!initial) {
        initial.emplace(static_cast<std::size_t>(scenario.n_tbs()), config.architecture);
        std::mt19937_64 rng(derive_seed(config.seed, 50));
        initial->initialize(rng);
    }
    if (initial->n_tbs() != static_cast<std::size_t>(scenario.n_tbs()))
        throw std::invalid_argument("policy has " + std::to_string(initial->n_tbs()) + " outputs but the pool has " +
                                    std::to_string(scenario.n_tbs()) + " TBs");
    return run(scenario, config, std::move(*initial), start_epoch, nullptr, nullptr, std::move(hooks));
}

nn::Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& config, const std::string& scenario) {
    nn::Checkpoint ck;
    ck.meta = {{"kind", "vrls-policy"},
               {"n_tbs", result.policy.n_tbs()},
               {"architecture", to_json(result.policy.architecture())},
               {"actor_layers", result.policy.actor.architecture()},
               {"critic_layers", result.policy.critic.architecture()},
               {"epoch", result.epoch},
               {"optimizer", config.optimizer},
               {"scenario", scenario},
               {"train", to_json(config)}};
    ck.groups.emplace_back("actor", result.policy.actor.parameters());
    ck.groups.emplace_back("critic", result.policy.critic.parameters());
    ck.groups.emplace_back("actor_optimizer", result.actor_optimizer_state);
    ck.groups.emplace_back("critic_optimizer", result.critic_optimizer_state);
    return ck;
}

Policy policy_from_checkpoint(const nn::Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "vrls-policy") throw std::runtime_error("checkpoint does not hold a VRLS policy");
    Policy p(ck.meta.at("n_tbs").get<std::size_t>(), architecture_from_json(ck.meta.at("architecture")));
    p.actor.set_parameters(ck.group("actor"));
    p.critic.set_parameters(ck.group("critic"));
    return p;
}

TrainResult retrain(const nn::Checkpoint& ck, const ScenarioConfig& scenario, const TrainConfig& config,
                    RetrainOptions options, TrainHooks hooks) {
    Policy policy = policy_from_checkpoint(ck);
    if (policy.n_tbs() != static_cast<std::size_t>(scenario.n_tbs()))
        throw std::invalid_argument("pool size mismatch: checkpoint has " + std::to_string(policy.n_tbs()) +
                                    " TBs, scenario '" + scenario.name + "' has " + std::to_string(scenario.n_tbs()));
    TrainConfig c = config;
    c.architecture = policy.architecture();
    const std::int64_t start = options.restart_schedule ? 0 : ck.meta.at("epoch").get<std::int64_t>();
    const bool same_optimizer = ck.meta.value("optimizer", "") == c.optimizer && ck.has_group("actor_optimizer");
    const nn::ParameterSet* as = same_optimizer ? &ck.group("actor_optimizer") : nullptr;
    const nn::ParameterSet* cs = same_optimizer ? &ck.group("critic_optimizer") : nullptr;
    return run(scenario, c, std::move(policy), start, as, cs, std::move(hooks));
}

}  // namespace vrls::agent
