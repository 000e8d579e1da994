#pragma once

// Blocks-world (STACK / UNSTACK / ON) and cliff-walking MDPs with their logic
// state encoders, plus the shared action decoder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nlrl/deduction.hpp"
#include "nlrl/logic.hpp"
#include "nlrl/rng.hpp"

namespace nlrl {

enum class Task { stack, unstack, on, cliff, windy_cliff };

inline constexpr double kStepPenalty = -0.02;
inline constexpr double kGoalReward = 1.0;
inline constexpr double kCliffReward = -1.0;
// The initial state counts as step 1: an episode that never reaches an
// absorbing state ends after 49 actions with return -0.98.
inline constexpr int kEpisodeStepLimit = 50;
inline constexpr int kMaxActions = kEpisodeStepLimit - 1;
inline constexpr double kWindProbability = 0.1;
inline constexpr int kMaxBlocks = 7;

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::stack: return "stack";
    case Task::unstack: return "unstack";
    case Task::on: return "on";
    case Task::cliff: return "cliff";
    case Task::windy_cliff: return "windy-cliff";
  }
  return "?";
}

inline std::string_view task_display_name(Task t) {
  switch (t) {
    case Task::stack: return "STACK";
    case Task::unstack: return "UNSTACK";
    case Task::on: return "ON";
    case Task::cliff: return "Cliff-walking";
    case Task::windy_cliff: return "Windy Cliff-walking";
  }
  return "?";
}

inline const std::vector<Task>& all_tasks() {
  static const std::vector<Task> tasks = {Task::unstack, Task::stack, Task::on, Task::cliff, Task::windy_cliff};
  return tasks;
}

inline Task parse_task(std::string_view name) {
  for (Task t : all_tasks())
    if (task_name(t) == name) return t;
  throw Error("unknown task '" + std::string(name) + "'; valid tasks: unstack, stack, on, cliff, windy-cliff");
}

inline bool is_blocks(Task t) { return t == Task::stack || t == Task::unstack || t == Task::on; }

inline std::vector<std::string> task_variants(Task t) {
  switch (t) {
    case Task::unstack: return {"training", "swap-top-2", "2-columns", "5-blocks", "6-blocks", "7-blocks"};
    case Task::stack: return {"training", "swap-right-2", "2-columns", "5-blocks", "6-blocks", "7-blocks"};
    case Task::on: return {"training", "swap-top-2", "swap-middle-2", "5-blocks", "6-blocks", "7-blocks"};
    case Task::cliff:
    case Task::windy_cliff: return {"training", "top-left", "top-right", "center", "6x6", "7x7"};
  }
  return {};
}

// ---------------------------------------------------------------------------
// States

// Columns bottom-to-top; blocks are indices into the label list a, b, c, ...
struct BlocksState {
  std::vector<std::vector<int>> columns;
  int steps = 1;

  bool operator==(const BlocksState&) const = default;
};

enum class TerminalCause { none, goal, cliff, timeout };

struct CliffState {
  int x = 0;  // column, 0 = left
  int y = 0;  // row, 0 = bottom
  int size = 5;
  int steps = 1;
  TerminalCause cause = TerminalCause::none;

  bool operator==(const CliffState&) const = default;
};

using EnvState = std::variant<BlocksState, CliffState>;

struct TaskSpec {
  Task task = Task::unstack;
  std::string variant;
  // Extensional predicates, constants and background; action predicates are
  // listed separately so a sketch can slot invented predicates in between.
  LanguageSignature signature;
  std::vector<Predicate> action_predicates;
  int n_blocks = 0;
  int grid = 0;
  bool windy = false;
  EnvState initial;

  std::size_t action_count() const {
    std::size_t n = 0;
    for (const auto& p : action_predicates) n += p.arity == 0 ? 1 : (p.arity == 1 ? signature.constants.size()
                                                                                   : signature.constants.size() *
                                                                                         signature.constants.size());
    return n;
  }
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool terminal = false;
};

inline std::string block_label(int i) { return std::string(1, static_cast<char>('a' + i)); }

inline std::string format_blocks(const BlocksState& s) {
  std::string out = "(";
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    if (c) out += ",";
    out += "(";
    for (std::size_t i = 0; i < s.columns[c].size(); ++i) {
      if (i) out += ",";
      out += block_label(s.columns[c][i]);
    }
    out += ")";
  }
  return out + ")";
}

// ---------------------------------------------------------------------------
// Task construction

namespace detail {

inline TaskSpec blocks_spec(Task task, std::string variant, std::vector<std::vector<int>> columns) {
  TaskSpec spec;
  spec.task = task;
  spec.variant = std::move(variant);
  int n = 0;
  for (const auto& c : columns) n += static_cast<int>(c.size());
  spec.n_blocks = n;
  for (int i = 0; i < n; ++i) spec.signature.constants.push_back(block_label(i));
  spec.signature.constants.push_back("floor");
  spec.signature.predicates = {{"on", 2, PredicateKind::extensional},
                               {"top", 1, PredicateKind::extensional},
                               {"isFloor", 1, PredicateKind::extensional}};
  spec.signature.background = {{"isFloor", {"floor"}}};
  if (task == Task::on) {
    spec.signature.predicates.push_back({"goalOn", 2, PredicateKind::extensional});
    spec.signature.background.push_back({"goalOn", {"a", "b"}});
  }
  spec.action_predicates = {{"move", 2, PredicateKind::action}};
  spec.initial = BlocksState{std::move(columns), 1};
  return spec;
}

inline TaskSpec cliff_spec(Task task, std::string variant, int size, int x, int y) {
  TaskSpec spec;
  spec.task = task;
  spec.variant = std::move(variant);
  spec.grid = size;
  spec.windy = task == Task::windy_cliff;
  for (int i = 0; i < size; ++i) spec.signature.constants.push_back(std::to_string(i));
  spec.signature.predicates = {{"current", 2, PredicateKind::extensional},
                               {"zero", 1, PredicateKind::extensional},
                               {"last", 1, PredicateKind::extensional},
                               {"succ", 2, PredicateKind::extensional}};
  spec.signature.background.push_back({"zero", {"0"}});
  spec.signature.background.push_back({"last", {std::to_string(size - 1)}});
  for (int i = 0; i + 1 < size; ++i)
    spec.signature.background.push_back({"succ", {std::to_string(i), std::to_string(i + 1)}});
  spec.action_predicates = {{"up", 0, PredicateKind::action},
                            {"down", 0, PredicateKind::action},
                            {"left", 0, PredicateKind::action},
                            {"right", 0, PredicateKind::action}};
  spec.initial = CliffState{x, y, size, 1, TerminalCause::none};
  return spec;
}

inline std::vector<std::vector<int>> single_column(int n) {
  std::vector<int> col(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = i;
  return {col};
}

inline std::vector<std::vector<int>> all_on_floor(int n) {
  std::vector<std::vector<int>> cols;
  for (int i = 0; i < n; ++i) cols.push_back({i});
  return cols;
}

}  // namespace detail

class UnknownVariantError : public Error {
 public:
  using Error::Error;
};

inline TaskSpec make_variant(Task task, std::string_view variant) {
  const std::string v(variant);
  auto unknown = [&]() {
    std::string msg = "unknown variant '" + v + "' for task " + std::string(task_name(task)) + "; valid variants:";
    for (const auto& name : task_variants(task)) msg += " " + name;
    return UnknownVariantError(msg);
  };
  auto blocks_count = [&]() -> int {
    if (v == "5-blocks") return 5;
    if (v == "6-blocks") return 6;
    if (v == "7-blocks") return 7;
    return 0;
  };
  switch (task) {
    case Task::unstack:
      if (v == "training") return detail::blocks_spec(task, v, {{0, 1, 2, 3}});
      if (v == "swap-top-2") return detail::blocks_spec(task, v, {{0, 1, 3, 2}});
      if (v == "2-columns") return detail::blocks_spec(task, v, {{0, 1}, {2, 3}});
      if (int n = blocks_count()) return detail::blocks_spec(task, v, detail::single_column(n));
      break;
    case Task::stack:
      if (v == "training") return detail::blocks_spec(task, v, detail::all_on_floor(4));
      if (v == "swap-right-2") return detail::blocks_spec(task, v, {{0}, {1}, {3}, {2}});
      if (v == "2-columns") return detail::blocks_spec(task, v, {{0, 1}, {3, 2}});
      if (int n = blocks_count()) return detail::blocks_spec(task, v, detail::all_on_floor(n));
      break;
    case Task::on:
      if (v == "training") return detail::blocks_spec(task, v, {{0, 1, 2, 3}});
      if (v == "swap-top-2") return detail::blocks_spec(task, v, {{0, 1, 3, 2}});
      if (v == "swap-middle-2") return detail::blocks_spec(task, v, {{0, 2, 1, 3}});
      if (int n = blocks_count()) return detail::blocks_spec(task, v, detail::single_column(n));
      break;
    case Task::cliff:
    case Task::windy_cliff:
      if (v == "training") return detail::cliff_spec(task, v, 5, 0, 0);
      if (v == "top-left") return detail::cliff_spec(task, v, 5, 0, 4);
      if (v == "top-right") return detail::cliff_spec(task, v, 5, 4, 4);
      if (v == "center") return detail::cliff_spec(task, v, 5, 2, 2);
      if (v == "6x6") return detail::cliff_spec(task, v, 6, 0, 0);
      if (v == "7x7") return detail::cliff_spec(task, v, 7, 0, 0);
      break;
  }
  throw unknown();
}

// ---------------------------------------------------------------------------
// State encoding

inline std::vector<GroundAtom> encode_state(const EnvState& state, const TaskSpec& spec) {
  std::vector<GroundAtom> atoms;
  if (const auto* b = std::get_if<BlocksState>(&state)) {
    for (const auto& col : b->columns) {
      if (col.empty()) continue;
      atoms.push_back({"top", {block_label(col.back())}});
      for (std::size_t i = col.size(); i-- > 0;)
        atoms.push_back({"on", {block_label(col[i]), i == 0 ? std::string("floor") : block_label(col[i - 1])}});
    }
  } else {
    const auto& c = std::get<CliffState>(state);
    atoms.push_back({"current", {std::to_string(c.x), std::to_string(c.y)}});
  }
  atoms.insert(atoms.end(), spec.signature.background.begin(), spec.signature.background.end());
  return atoms;
}

// Writes e0 directly into `e` (sized to the table) without building atoms.
inline void encode_valuation(const EnvState& state, const TaskSpec& spec, const GroundAtomTable& table, Valuation& e) {
  e.assign(table.size(), 0.0);
  for (const auto& g : spec.signature.background) e[table.index(g)] = 1.0;
  if (const auto* b = std::get_if<BlocksState>(&state)) {
    const std::size_t on = table.predicate_index("on");
    const std::size_t top = table.predicate_index("top");
    const int floor = spec.n_blocks;
    for (const auto& col : b->columns) {
      if (col.empty()) continue;
      int t[1] = {col.back()};
      e[table.index(top, t)] = 1.0;
      for (std::size_t i = 0; i < col.size(); ++i) {
        int args[2] = {col[i], i == 0 ? floor : col[i - 1]};
        e[table.index(on, args)] = 1.0;
      }
    }
  } else {
    const auto& c = std::get<CliffState>(state);
    int args[2] = {c.x, c.y};
    e[table.index(table.predicate_index("current"), args)] = 1.0;
  }
}

// ---------------------------------------------------------------------------
// Dynamics

inline bool blocks_goal(const BlocksState& s, Task task) {
  switch (task) {
    case Task::stack: return s.columns.size() == 1;
    case Task::unstack:
      return std::all_of(s.columns.begin(), s.columns.end(), [](const auto& c) { return c.size() == 1; });
    case Task::on:
      for (const auto& col : s.columns)
        for (std::size_t i = 1; i < col.size(); ++i)
          if (col[i] == 0 && col[i - 1] == 1) return true;
      return false;
    default: return false;
  }
}

// Action index encodes move(X,Y) as X * n_entities + Y over (blocks..., floor).
inline StepResult blocks_step(const BlocksState& state, std::size_t action, const TaskSpec& spec) {
  const int n_entities = spec.n_blocks + 1;
  if (action >= static_cast<std::size_t>(n_entities * n_entities))
    throw Error("unknown action index " + std::to_string(action) + " for blocks task");
  const int x = static_cast<int>(action) / n_entities;
  const int y = static_cast<int>(action) % n_entities;
  const int floor = spec.n_blocks;

  BlocksState next = state;
  next.steps = state.steps + 1;

  int from = -1, to = -1;
  for (std::size_t c = 0; c < state.columns.size(); ++c) {
    if (state.columns[c].back() == x) from = static_cast<int>(c);
    if (state.columns[c].back() == y) to = static_cast<int>(c);
  }
  const bool valid = x != floor && from >= 0 && x != y && (y == floor || to >= 0);
  const bool trivial = valid && y == floor && state.columns[static_cast<std::size_t>(from)].size() == 1;
  if (valid && !trivial) {
    next.columns[static_cast<std::size_t>(from)].pop_back();
    if (y == floor)
      next.columns.push_back({x});
    else
      next.columns[static_cast<std::size_t>(to)].push_back(x);
    if (next.columns[static_cast<std::size_t>(from)].empty())
      next.columns.erase(next.columns.begin() + from);
  }
  StepResult r;
  const bool goal = blocks_goal(next, spec.task);
  r.reward = kStepPenalty + (goal ? kGoalReward : 0.0);
  r.terminal = goal || next.steps >= kEpisodeStepLimit;
  r.next = std::move(next);
  return r;
}

inline bool is_cliff_cell(int x, int y, int size) { return y == 0 && x >= 1 && x <= size - 2; }
inline bool is_goal_cell(int x, int y, int size) { return y == 0 && x == size - 1; }

enum class CliffAction { up = 0, down = 1, left = 2, right = 3 };

// Applies a displacement deterministically; `blown` replaces it with down.
inline StepResult cliff_transition(const CliffState& state, std::size_t action, bool blown) {
  if (state.cause != TerminalCause::none) throw Error("cliff step after terminal state");
  if (action > 3) throw Error("unknown action index " + std::to_string(action) + " for cliff task");
  static constexpr int kDx[4] = {0, 0, -1, 1};
  static constexpr int kDy[4] = {1, -1, 0, 0};
  const std::size_t a = blown ? static_cast<std::size_t>(CliffAction::down) : action;
  CliffState next = state;
  next.steps = state.steps + 1;
  const int nx = state.x + kDx[a];
  const int ny = state.y + kDy[a];
  if (nx >= 0 && nx < state.size && ny >= 0 && ny < state.size) {
    next.x = nx;
    next.y = ny;
  }
  StepResult r;
  r.reward = kStepPenalty;
  if (is_cliff_cell(next.x, next.y, state.size)) {
    r.reward += kCliffReward;
    next.cause = TerminalCause::cliff;
  } else if (is_goal_cell(next.x, next.y, state.size)) {
    r.reward += kGoalReward;
    next.cause = TerminalCause::goal;
  } else if (next.steps >= kEpisodeStepLimit) {
    next.cause = TerminalCause::timeout;
  }
  r.terminal = next.cause != TerminalCause::none;
  r.next = next;
  return r;
}

inline StepResult cliff_step(const CliffState& state, std::size_t action, const TaskSpec& spec, Rng& rng) {
  bool blown = spec.windy && rng.uniform() < kWindProbability;
  return cliff_transition(state, action, blown);
}

// ---------------------------------------------------------------------------
// Action decoding: probability proportional to the action valuation when the
// total exceeds 1, otherwise the missing mass is spread uniformly.

inline std::vector<double> action_distribution(std::span<const double> valuations) {
  const std::size_t n = valuations.size();
  double sigma = 0.0;
  for (double v : valuations) sigma += v;
  std::vector<double> p(n);
  if (sigma >= 1.0) {
    for (std::size_t i = 0; i < n; ++i) p[i] = valuations[i] / sigma;
  } else {
    const double residue = (1.0 - sigma) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = valuations[i] + residue;
  }
  return p;
}

// Pulls a gradient over probabilities back to the action valuations.
inline std::vector<double> action_distribution_backward(std::span<const double> valuations,
                                                        std::span<const double> grad_probs) {
  const std::size_t n = valuations.size();
  double sigma = 0.0;
  for (double v : valuations) sigma += v;
  std::vector<double> g(n);
  if (sigma >= 1.0) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += grad_probs[i] * valuations[i];
    for (std::size_t k = 0; k < n; ++k) g[k] = grad_probs[k] / sigma - dot / (sigma * sigma);
  } else {
    double total = 0.0;
    for (double d : grad_probs) total += d;
    for (std::size_t k = 0; k < n; ++k) g[k] = grad_probs[k] - total / static_cast<double>(n);
  }
  return g;
}

struct ActionChoice {
  std::size_t action = 0;
  std::vector<double> probs;
  double log_prob = 0.0;
};

inline ActionChoice decode_action(std::span<const double> e, std::span<const std::size_t> action_atoms, Rng& rng) {
  std::vector<double> vals(action_atoms.size());
  for (std::size_t i = 0; i < action_atoms.size(); ++i) vals[i] = e[action_atoms[i]];
  ActionChoice c;
  c.probs = action_distribution(vals);
  c.action = rng.categorical(c.probs);
  c.log_prob = std::log(c.probs[c.action]);
  return c;
}

// ---------------------------------------------------------------------------

// One episode's worth of environment: the spec, the live state, and a private
// wind stream.
class Environment {
 public:
  Environment(TaskSpec spec, std::uint64_t wind_seed) : spec_(std::move(spec)), wind_(wind_seed) { reset(); }

  void reset() {
    state_ = spec_.initial;
    done_ = false;
  }

  void reseed(std::uint64_t wind_seed) { wind_ = Rng(wind_seed); }

  StepResult step(std::size_t action) {
    if (done_) throw Error("step called on a finished episode");
    StepResult r = is_blocks(spec_.task) ? blocks_step(std::get<BlocksState>(state_), action, spec_)
                                         : cliff_step(std::get<CliffState>(state_), action, spec_, wind_);
    state_ = r.next;
    done_ = r.terminal;
    return r;
  }

  const TaskSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }
  bool done() const { return done_; }
  std::size_t action_count() const { return spec_.action_count(); }

 private:
  TaskSpec spec_;
  EnvState state_;
  Rng wind_;
  bool done_ = false;
};

}  // namespace nlrl
