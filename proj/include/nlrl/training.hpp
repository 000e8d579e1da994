#pragma once

// Vanilla policy gradient with GAE advantages and a learned value baseline,
// shared by every trainable agent.

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "nlrl/agents.hpp"
#include "nlrl/envs.hpp"
#include "nlrl/nn.hpp"
#include "nlrl/rng.hpp"

namespace nlrl {

struct Episode {
  std::vector<EnvState> states;
  std::vector<std::vector<double>> features;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<std::vector<double>> scores;         // ∇θ log π(a_t|s_t)
  std::vector<std::vector<double>> entropy_grads;  // ∇θ H(π(·|s_t)), only with an entropy bonus
  TerminalCause cause = TerminalCause::none;
  double total_return = 0.0;

  std::size_t size() const { return actions.size(); }
};

inline TerminalCause terminal_cause(const EnvState& state, Task task, bool terminal) {
  if (!terminal) return TerminalCause::none;
  if (const auto* c = std::get_if<CliffState>(&state)) return c->cause;
  return blocks_goal(std::get<BlocksState>(state), task) ? TerminalCause::goal : TerminalCause::timeout;
}

// Resets `env` and rolls the agent until the episode ends.
inline Episode collect_episode(Agent& agent, Environment& env, Rng& rng, GradientRequest request = {}) {
  env.reset();
  Episode ep;
  bool terminal = false;
  while (!terminal) {
    const EnvState state = env.state();
    ActResult a = agent.act(state, rng, request);
    StepResult r = env.step(a.action);
    ep.features.push_back(state_features(state));
    ep.states.push_back(state);
    ep.actions.push_back(a.action);
    ep.log_probs.push_back(a.log_prob);
    ep.rewards.push_back(r.reward);
    if (request.score) ep.scores.push_back(std::move(a.score));
    if (request.entropy) ep.entropy_grads.push_back(std::move(a.entropy_grad));
    ep.total_return += r.reward;
    terminal = r.terminal;
    if (terminal) ep.cause = terminal_cause(r.next, env.spec().task, true);
  }
  return ep;
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;  // advantage + value, the regression target for the baseline
};

// δ_t = r_t + γV(s_{t+1}) − V(s_t), with V = 0 past the last step.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                             double lambda) {
  if (rewards.size() != values.size())
    throw DimensionError("GAE needs one value per reward (" + std::to_string(rewards.size()) + " rewards, " +
                         std::to_string(values.size()) + " values)");
  const std::size_t n = rewards.size();
  GaeResult g;
  g.advantages.assign(n, 0.0);
  g.targets.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next = t + 1 < n ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * next - values[t];
    running = delta + gamma * lambda * running;
    g.advantages[t] = running;
    g.targets[t] = running + values[t];
  }
  return g;
}

class NonFiniteGradientError : public Error {
 public:
  NonFiniteGradientError(std::size_t index, double value)
      : Error("non-finite gradient " + std::to_string(value) + " at parameter " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Loss −Σ A_t log π(a_t|s_t) − β Σ H_t over the batch; one optimizer step.
// Returns the policy loss without the entropy term.
inline double policy_update(Agent& agent, std::span<const Episode> batch,
                            std::span<const std::vector<double>> advantages, RmsProp& optimizer,
                            double entropy_coef = 0.0) {
  if (batch.size() != advantages.size()) throw DimensionError("one advantage list per episode required");
  const std::size_t n = agent.parameter_count();
  std::vector<double> grad(n, 0.0);
  double loss = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const Episode& ep = batch[e];
    if (advantages[e].size() != ep.size()) throw DimensionError("advantage count does not match episode length");
    if (ep.scores.size() != ep.size()) throw Error("episode was collected without score gradients");
    for (std::size_t t = 0; t < ep.size(); ++t) {
      const double a = advantages[e][t];
      loss -= a * ep.log_probs[t];
      if (a != 0.0)
        for (std::size_t i = 0; i < n; ++i) grad[i] -= a * ep.scores[t][i];
      if (entropy_coef != 0.0) {
        if (ep.entropy_grads.size() != ep.size()) throw Error("episode was collected without entropy gradients");
        for (std::size_t i = 0; i < n; ++i) grad[i] -= entropy_coef * ep.entropy_grads[t][i];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(grad[i])) throw NonFiniteGradientError(i, grad[i]);
  optimizer.step(agent.mutable_parameters(), grad);
  return loss;
}

struct TrainConfig {
  double gamma = 1.0;
  double lambda = 0.95;
  RmsPropConfig optimizer;
  int episodes = 30000;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double entropy_coef = 0.0;
  bool normalize_advantages = false;
  int workers = 1;
  // Early stop once the moving average over `window` episodes is within
  // `tolerance` of `target`.
  std::optional<double> target;
  int window = 200;
  double tolerance = 0.01;
  double max_seconds = 0.0;  // 0 = unlimited
};

struct TrainLogRow {
  int episode = 0;
  double mean_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::vector<double> returns;  // every episode's undiscounted return
  int episodes = 0;
  bool early_stopped = false;
  bool timed_out = false;
  double seconds = 0.0;
};

inline void write_train_log_header(std::ostream& out) { out << "episode,mean_return,policy_loss,value_loss,seconds\n"; }

inline void write_train_log_row(std::ostream& out, const TrainLogRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.3f\n", r.episode, r.mean_return, r.policy_loss, r.value_loss,
                r.seconds);
  out << buf;
}

namespace detail {

inline std::vector<Episode> collect_batch(Agent& agent, const TaskSpec& spec, const TrainConfig& cfg, int first,
                                          int count, GradientRequest request) {
  std::vector<Episode> batch(static_cast<std::size_t>(count));
  auto run = [&](Agent& a, int k) {
    const auto index = static_cast<std::uint64_t>(first + k);
    Environment env(spec, derive_seed(cfg.seed, "wind", index));
    Rng rng(derive_seed(cfg.seed, "train", index));
    batch[static_cast<std::size_t>(k)] = collect_episode(a, env, rng, request);
  };
  const int workers = std::max(1, std::min(cfg.workers, count));
  if (workers == 1) {
    for (int k = 0; k < count; ++k) run(agent, k);
    return batch;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        auto local = agent.clone();
        for (int k = w; k < count; k += workers) run(*local, k);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return batch;
}

}  // namespace detail

// collect -> GAE -> policy step -> value step, one batch at a time.
inline TrainResult train(Agent& agent, Mlp& value_net, const TaskSpec& spec, const TrainConfig& cfg,
                         const std::function<void(const TrainLogRow&)>& on_row = {}) {
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw Error("gamma must lie in [0, 1]");
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw Error("lambda must lie in [0, 1]");
  if (cfg.batch_size < 1) throw Error("batch size must be at least 1");
  RmsProp policy_opt(agent.parameter_count(), cfg.optimizer);
  RmsProp value_opt(value_net.parameters().size(), cfg.optimizer);
  const GradientRequest request{true, cfg.entropy_coef != 0.0};
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  TrainResult result;
  std::deque<double> window;
  double window_sum = 0.0;
  while (result.episodes < cfg.episodes) {
    const int count = std::min(cfg.batch_size, cfg.episodes - result.episodes);
    std::vector<Episode> batch = detail::collect_batch(agent, spec, cfg, result.episodes, count, request);

    std::vector<std::vector<double>> advantages;
    std::vector<std::vector<double>> features;
    std::vector<double> targets;
    double batch_return = 0.0;
    for (const Episode& ep : batch) {
      std::vector<double> values;
      for (const auto& f : ep.features) values.push_back(value_predict(value_net, f));
      GaeResult g = compute_gae(ep.rewards, values, cfg.gamma, cfg.lambda);
      advantages.push_back(std::move(g.advantages));
      features.insert(features.end(), ep.features.begin(), ep.features.end());
      targets.insert(targets.end(), g.targets.begin(), g.targets.end());
      batch_return += ep.total_return;
    }
    if (cfg.normalize_advantages) {
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (const auto& a : advantages)
        for (double x : a) sum += x, sq += x * x, ++n;
      const double mean = sum / static_cast<double>(n);
      const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
      for (auto& a : advantages)
        for (double& x : a) x = (x - mean) / (sd + 1e-8);
    }

    TrainLogRow row;
    row.policy_loss = policy_update(agent, batch, advantages, policy_opt, cfg.entropy_coef);
    row.value_loss = value_update(value_net, value_opt, features, targets);
    result.episodes += count;
    row.episode = result.episodes;
    row.mean_return = batch_return / static_cast<double>(count);
    row.seconds = elapsed();
    result.log.push_back(row);
    if (on_row) on_row(row);

    for (const Episode& ep : batch) {
      result.returns.push_back(ep.total_return);
      window.push_back(ep.total_return);
      window_sum += ep.total_return;
      if (static_cast<int>(window.size()) > cfg.window) {
        window_sum -= window.front();
        window.pop_front();
      }
    }
    if (cfg.target && static_cast<int>(window.size()) == cfg.window &&
        std::abs(window_sum / cfg.window - *cfg.target) <= cfg.tolerance) {
      result.early_stopped = true;
      break;
    }
    if (cfg.max_seconds > 0.0 && row.seconds >= cfg.max_seconds) {
      result.timed_out = true;
      break;
    }
  }
  result.seconds = elapsed();
  return result;
}

}  // namespace nlrl
