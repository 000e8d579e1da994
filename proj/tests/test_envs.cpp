#include <gtest/gtest.h>

#include <random>
#include <set>

#include "nlrl/envs.hpp"

using namespace nlrl;

namespace {

std::set<std::string> atom_texts(const std::vector<GroundAtom>& atoms) {
  std::set<std::string> out;
  for (const auto& a : atoms) out.insert(format_ground_atom(a));
  return out;
}

// move(X,Y) index for a blocks spec, by constant name.
std::size_t move(const TaskSpec& spec, const std::string& x, const std::string& y) {
  const auto& c = spec.signature.constants;
  auto pos = [&](const std::string& s) { return static_cast<std::size_t>(std::find(c.begin(), c.end(), s) - c.begin()); };
  return pos(x) * c.size() + pos(y);
}

}  // namespace

TEST(Encode, BlocksState) {
  TaskSpec spec = make_variant(Task::unstack, "training");
  BlocksState s{{{0, 1, 2}, {3}}, 1};
  EXPECT_EQ(atom_texts(encode_state(s, spec)),
            (std::set<std::string>{"top(d)", "top(c)", "on(d,floor)", "on(c,b)", "on(b,a)", "on(a,floor)",
                                   "isFloor(floor)"}));
}

TEST(Encode, SingleBlock) {
  TaskSpec spec = make_variant(Task::unstack, "training");
  EXPECT_EQ(atom_texts(encode_state(BlocksState{{{0}}, 1}, spec)),
            (std::set<std::string>{"top(a)", "on(a,floor)", "isFloor(floor)"}));
}

TEST(Encode, CliffState) {
  TaskSpec spec = make_variant(Task::cliff, "training");
  EXPECT_EQ(atom_texts(encode_state(CliffState{1, 2, 5, 1, TerminalCause::none}, spec)),
            (std::set<std::string>{"current(1,2)", "zero(0)", "last(4)", "succ(0,1)", "succ(1,2)", "succ(2,3)",
                                   "succ(3,4)"}));
}

TEST(Encode, OnIncludesGoalBackground) {
  TaskSpec spec = make_variant(Task::on, "training");
  auto atoms = atom_texts(encode_state(spec.initial, spec));
  EXPECT_TRUE(atoms.count("goalOn(a,b)"));
  EXPECT_TRUE(atoms.count("isFloor(floor)"));
}

TEST(BlocksStep, ValidMove) {
  TaskSpec spec = make_variant(Task::unstack, "training");
  BlocksState s{{{0, 1, 2}, {3}}, 1};
  StepResult r = blocks_step(s, move(spec, "c", "d"), spec);
  EXPECT_EQ(std::get<BlocksState>(r.next).columns, (std::vector<std::vector<int>>{{0, 1}, {3, 2}}));
  EXPECT_DOUBLE_EQ(r.reward, -0.02);
  EXPECT_FALSE(r.terminal);
}

TEST(BlocksStep, InvalidMovesAreNoOps) {
  TaskSpec spec = make_variant(Task::unstack, "training");
  BlocksState s{{{0, 1, 2}, {3}}, 1};
  for (auto [x, y] : std::vector<std::pair<std::string, std::string>>{
           {"floor", "a"}, {"a", "d"}, {"c", "c"}, {"c", "b"}, {"d", "a"}, {"floor", "floor"}}) {
    StepResult r = blocks_step(s, move(spec, x, y), spec);
    EXPECT_EQ(std::get<BlocksState>(r.next).columns, s.columns) << x << "," << y;
    EXPECT_DOUBLE_EQ(r.reward, -0.02);
  }
  EXPECT_THROW(blocks_step(s, 25, spec), Error);
}

TEST(BlocksStep, UnstackOptimalPlay) {
  TaskSpec spec = make_variant(Task::unstack, "training");
  BlocksState s = std::get<BlocksState>(spec.initial);
  double ret = 0.0;
  int steps = 0;
  for (const char* x : {"d", "c", "b"}) {
    StepResult r = blocks_step(s, move(spec, x, "floor"), spec);
    ret += r.reward;
    ++steps;
    s = std::get<BlocksState>(r.next);
    EXPECT_EQ(r.terminal, steps == 3);
  }
  EXPECT_NEAR(ret, 0.940, 1e-12);
}

TEST(BlocksStep, GoalsPerTask) {
  EXPECT_TRUE(blocks_goal(BlocksState{{{0, 1, 2, 3}}, 1}, Task::stack));
  EXPECT_FALSE(blocks_goal(BlocksState{{{0, 1}, {2, 3}}, 1}, Task::stack));
  EXPECT_TRUE(blocks_goal(BlocksState{{{0}, {1}, {2}}, 1}, Task::unstack));
  EXPECT_TRUE(blocks_goal(BlocksState{{{2, 1, 0}, {3}}, 1}, Task::on));
  EXPECT_FALSE(blocks_goal(BlocksState{{{0, 1, 2, 3}}, 1}, Task::on));
  EXPECT_FALSE(blocks_goal(BlocksState{{{1}, {0}}, 1}, Task::on));
}

TEST(BlocksStep, TimeoutAtStepLimit) {
  TaskSpec spec = make_variant(Task::unstack, "training");
  Environment env(spec, 0);
  int actions = 0;
  double ret = 0.0;
  while (!env.done()) {
    ret += env.step(move(spec, "floor", "a")).reward;  // always invalid
    ++actions;
  }
  EXPECT_EQ(actions, kEpisodeStepLimit - 1);
  EXPECT_NEAR(ret, -0.98, 1e-12);
  EXPECT_THROW(env.step(0), Error);
}

TEST(BlocksStep, RandomWalkPreservesBlocks) {
  std::mt19937_64 rng(1);
  for (Task t : {Task::stack, Task::unstack, Task::on}) {
    TaskSpec spec = make_variant(t, "7-blocks");
    Environment env(spec, 0);
    int len = 0;
    while (!env.done()) {
      StepResult r = env.step(rng() % spec.action_count());
      ++len;
      std::multiset<int> blocks;
      for (const auto& c : std::get<BlocksState>(r.next).columns) {
        EXPECT_FALSE(c.empty());
        blocks.insert(c.begin(), c.end());
      }
      EXPECT_EQ(blocks, (std::multiset<int>{0, 1, 2, 3, 4, 5, 6}));
      EXPECT_TRUE(r.reward == -0.02 || std::abs(r.reward - 0.98) < 1e-12);
    }
    EXPECT_LE(len, kEpisodeStepLimit);
  }
}

TEST(CliffStep, OptimalPath) {
  TaskSpec spec = make_variant(Task::cliff, "training");
  Environment env(spec, 0);
  double ret = 0.0;
  for (CliffAction a : {CliffAction::up, CliffAction::right, CliffAction::right, CliffAction::right,
                        CliffAction::right, CliffAction::down})
    ret += env.step(static_cast<std::size_t>(a)).reward;
  EXPECT_TRUE(env.done());
  EXPECT_EQ(std::get<CliffState>(env.state()).cause, TerminalCause::goal);
  EXPECT_NEAR(ret, 0.880, 1e-12);
}

TEST(CliffStep, BumpAndCliff) {
  StepResult bump = cliff_transition(CliffState{4, 4, 5, 1, TerminalCause::none}, 3, false);
  EXPECT_EQ(std::get<CliffState>(bump.next).x, 4);
  EXPECT_EQ(std::get<CliffState>(bump.next).y, 4);
  EXPECT_DOUBLE_EQ(bump.reward, -0.02);
  EXPECT_FALSE(bump.terminal);

  StepResult fall = cliff_transition(CliffState{1, 1, 5, 1, TerminalCause::none}, 1, false);
  EXPECT_TRUE(fall.terminal);
  EXPECT_DOUBLE_EQ(fall.reward, -1.02);
  EXPECT_EQ(std::get<CliffState>(fall.next).cause, TerminalCause::cliff);
  EXPECT_THROW(cliff_transition(std::get<CliffState>(fall.next), 0, false), Error);
  EXPECT_THROW(cliff_transition(CliffState{}, 7, false), Error);
}

TEST(CliffStep, WindOnlyWhenDrawBelowProbability) {
  TaskSpec windy = make_variant(Task::windy_cliff, "center");
  const CliffState s = std::get<CliffState>(windy.initial);
  int blown = 0;
  const int trials = 20000;
  for (int seed = 0; seed < trials; ++seed) {
    Rng probe(static_cast<std::uint64_t>(seed)), rng(static_cast<std::uint64_t>(seed));
    const bool wind = probe.uniform() < kWindProbability;
    StepResult r = cliff_step(s, static_cast<std::size_t>(CliffAction::up), windy, rng);
    StepResult want = cliff_transition(s, static_cast<std::size_t>(CliffAction::up), wind);
    EXPECT_EQ(std::get<CliffState>(r.next), std::get<CliffState>(want.next));
    blown += wind;
  }
  EXPECT_NEAR(blown / static_cast<double>(trials), 0.1, 0.01);

  TaskSpec calm = make_variant(Task::cliff, "center");
  Rng rng(0);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(std::get<CliffState>(cliff_step(s, 0, calm, rng).next), std::get<CliffState>(cliff_transition(s, 0, false).next));
}

TEST(Decode, ReferenceExamples) {
  auto p = action_distribution(std::vector<double>{0, 0, 0, 0});
  for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
  p = action_distribution(std::vector<double>{0.9, 0.1, 0, 0});
  EXPECT_NEAR(p[0], 0.9, 1e-15);
  EXPECT_NEAR(p[1], 0.1, 1e-15);
  EXPECT_EQ(p[2], 0.0);
  p = action_distribution(std::vector<double>{0.6, 0.2, 0, 0});
  EXPECT_NEAR(p[0], 0.65, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  EXPECT_NEAR(p[2], 0.05, 1e-15);
  EXPECT_NEAR(p[3], 0.05, 1e-15);
}

TEST(Decode, AlwaysADistribution) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(1 + rng() % 30);
    for (auto& x : v) x = u(rng) * (trial % 2 ? 1.0 : 0.1);
    auto p = action_distribution(v);
    double sum = 0.0;
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Decode, SamplesFollowProbabilities) {
  TaskSpec spec = make_variant(Task::cliff, "training");
  std::vector<double> e = {0.5, 0.3, 0.0, 0.0};
  std::vector<std::size_t> atoms = {0, 1, 2, 3};
  Rng rng(3);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 20000; ++i) {
    ActionChoice c = decode_action(e, atoms, rng);
    ++counts[c.action];
    EXPECT_NEAR(std::exp(c.log_prob), c.probs[c.action], 1e-12);
  }
  EXPECT_NEAR(counts[0] / 20000.0, 0.55, 0.015);
  EXPECT_NEAR(counts[3] / 20000.0, 0.05, 0.01);
}

TEST(Decode, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double scale : {0.1, 1.0}) {
    std::vector<double> v(5), g(5);
    for (auto& x : v) x = u(rng) * scale;
    for (auto& x : g) x = u(rng) - 0.5;
    auto f = [&](const std::vector<double>& x) {
      auto p = action_distribution(x);
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += g[i] * p[i];
      return s;
    };
    auto analytic = action_distribution_backward(v, g);
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto hi = v, lo = v;
      hi[k] += 1e-6;
      lo[k] -= 1e-6;
      EXPECT_NEAR(analytic[k], (f(hi) - f(lo)) / 2e-6, 1e-6);
    }
  }
}

TEST(Variants, InitialStates) {
  EXPECT_EQ(std::get<BlocksState>(make_variant(Task::stack, "training").initial).columns,
            (std::vector<std::vector<int>>{{0}, {1}, {2}, {3}}));
  EXPECT_EQ(std::get<BlocksState>(make_variant(Task::on, "swap-middle-2").initial).columns,
            (std::vector<std::vector<int>>{{0, 2, 1, 3}}));
  TaskSpec big = make_variant(Task::cliff, "7x7");
  EXPECT_EQ(big.grid, 7);
  EXPECT_EQ(std::get<CliffState>(big.initial).x, 0);
  EXPECT_EQ(std::get<CliffState>(big.initial).y, 0);
  EXPECT_TRUE(is_goal_cell(6, 0, 7));
  for (int x = 1; x <= 5; ++x) EXPECT_TRUE(is_cliff_cell(x, 0, 7));
  auto bg = atom_texts(big.signature.background);
  EXPECT_TRUE(bg.count("last(6)"));
  EXPECT_TRUE(bg.count("succ(5,6)"));
  TaskSpec seven = make_variant(Task::unstack, "7-blocks");
  EXPECT_EQ(seven.signature.constants.size(), 8u);
  EXPECT_EQ(seven.action_count(), 64u);
  for (Task t : all_tasks())
    for (const auto& v : task_variants(t)) EXPECT_NO_THROW(make_variant(t, v));
}

TEST(Variants, UnknownVariantListsValidNames) {
  try {
    make_variant(Task::cliff, "8x8");
    FAIL();
  } catch (const UnknownVariantError& e) {
    EXPECT_NE(std::string(e.what()).find("top-left"), std::string::npos);
  }
  EXPECT_THROW(parse_task("stacks"), Error);
}
