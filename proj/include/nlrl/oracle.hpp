#pragma once

// Exact optimal returns by finite-horizon backward induction over the
// enumerated state space of a task variant.

#include <algorithm>
#include <limits>
#include <map>
#include <vector>

#include "nlrl/envs.hpp"

namespace nlrl {

class StateExplosionError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kDefaultStateCap = 1000000;

struct Outcome {
  std::size_t next = 0;  // index into TabularModel::states, ignored when terminal
  double probability = 1.0;
  double reward = 0.0;
  bool terminal = false;
};

// Step counters are stripped from the states; the horizon carries time.
struct TabularModel {
  std::vector<EnvState> states;
  std::size_t actions = 0;
  std::size_t initial = 0;
  int horizon = kMaxActions;
  std::vector<std::vector<Outcome>> transitions;  // [state * actions + action]

  const std::vector<Outcome>& outcomes(std::size_t s, std::size_t a) const { return transitions[s * actions + a]; }
};

namespace detail {

// Column order carries no meaning for any goal, so states are keyed by
// sorted columns.
inline BlocksState canonical_blocks(BlocksState s) {
  std::sort(s.columns.begin(), s.columns.end());
  s.steps = 1;
  return s;
}

}  // namespace detail

inline TabularModel build_tabular_model(const TaskSpec& spec, std::size_t state_cap = kDefaultStateCap) {
  TabularModel m;
  m.actions = spec.action_count();
  if (is_blocks(spec.task)) {
    std::map<std::vector<std::vector<int>>, std::size_t> index;
    auto intern = [&](BlocksState s) {
      s = detail::canonical_blocks(std::move(s));
      auto [it, fresh] = index.emplace(s.columns, m.states.size());
      if (fresh) {
        if (m.states.size() >= state_cap)
          throw StateExplosionError("more than " + std::to_string(state_cap) + " reachable states");
        m.states.emplace_back(std::move(s));
      }
      return it->second;
    };
    m.initial = intern(std::get<BlocksState>(spec.initial));
    for (std::size_t s = 0; s < m.states.size(); ++s) {
      const BlocksState state = std::get<BlocksState>(m.states[s]);
      for (std::size_t a = 0; a < m.actions; ++a) {
        StepResult r = blocks_step(state, a, spec);
        const bool goal = blocks_goal(std::get<BlocksState>(r.next), spec.task);
        Outcome o{0, 1.0, r.reward, goal};
        if (!goal) o.next = intern(std::get<BlocksState>(r.next));
        m.transitions.push_back({o});
      }
    }
    return m;
  }

  const auto& start = std::get<CliffState>(spec.initial);
  const int n = start.size;
  auto id = [n](int x, int y) { return static_cast<std::size_t>(y * n + x); };
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.states.emplace_back(CliffState{x, y, n, 1, TerminalCause::none});
  m.initial = id(start.x, start.y);
  const double wind = spec.windy ? kWindProbability : 0.0;
  for (std::size_t s = 0; s < m.states.size(); ++s) {
    const auto& state = std::get<CliffState>(m.states[s]);
    const bool absorbing = is_cliff_cell(state.x, state.y, n) || is_goal_cell(state.x, state.y, n);
    for (std::size_t a = 0; a < m.actions; ++a) {
      std::vector<Outcome> outs;
      if (!absorbing) {
        for (bool blown : {false, true}) {
          const double p = blown ? wind : 1.0 - wind;
          if (p == 0.0) continue;
          StepResult r = cliff_transition(state, a, blown);
          const auto& next = std::get<CliffState>(r.next);
          outs.push_back({id(next.x, next.y), p, r.reward, r.terminal});
        }
      }
      m.transitions.push_back(std::move(outs));
    }
  }
  return m;
}

// V_h(s) = max_a Σ p (r + [not terminal] V_{h−1}(s')), V_0 = 0. Returns the
// full value table for the final horizon.
inline std::vector<double> backward_induction(const TabularModel& m) {
  std::vector<double> v(m.states.size(), 0.0), next(m.states.size());
  for (int h = 1; h <= m.horizon; ++h) {
    for (std::size_t s = 0; s < m.states.size(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < m.actions; ++a) {
        const auto& outs = m.outcomes(s, a);
        if (outs.empty()) {
          best = std::max(best, 0.0);
          continue;
        }
        double q = 0.0;
        for (const auto& o : outs) q += o.probability * (o.reward + (o.terminal ? 0.0 : v[o.next]));
        best = std::max(best, q);
      }
      next[s] = best;
    }
    if (next == v) break;  // deterministic tasks reach a fixed point early
    v.swap(next);
  }
  return v;
}

inline double optimal_return(const TaskSpec& spec, std::size_t state_cap = kDefaultStateCap) {
  TabularModel m = build_tabular_model(spec, state_cap);
  return backward_induction(m)[m.initial];
}

}  // namespace nlrl
