#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "nlrl/agents.hpp"
#include "nlrl/templates.hpp"

using namespace nlrl;

namespace {

// Independent enumerator: every body-atom pair over the variable pool, keyed
// by the lexicographically smallest rendering over all renamings of the
// non-head variables and both body orders.
std::set<std::string> brute_force(const LanguageSignature& sig, const Predicate& head_pred, int n_exist,
                                  bool intensional) {
  const int n_vars = head_pred.arity + n_exist;
  std::vector<std::pair<std::string, std::vector<int>>> atoms;
  for (const auto& p : sig.predicates) {
    if (p.kind == PredicateKind::action) continue;
    if (p.kind == PredicateKind::invented && !intensional) continue;
    if (p.arity == 0) atoms.push_back({p.name, {}});
    if (p.arity == 1)
      for (int a = 0; a < n_vars; ++a) atoms.push_back({p.name, {a}});
    if (p.arity == 2)
      for (int a = 0; a < n_vars; ++a)
        for (int b = 0; b < n_vars; ++b) atoms.push_back({p.name, {a, b}});
  }
  std::vector<int> head_args(static_cast<std::size_t>(head_pred.arity));
  std::iota(head_args.begin(), head_args.end(), 0);
  auto render = [](const std::string& name, const std::vector<int>& args, const std::vector<int>& perm) {
    std::string s = name + "(";
    for (int a : args) s += std::to_string(perm[static_cast<std::size_t>(a)]) + ",";
    return s + ")";
  };
  std::set<std::string> keys;
  for (const auto& b1 : atoms)
    for (const auto& b2 : atoms) {
      if ((b1.first == head_pred.name && b1.second == head_args) ||
          (b2.first == head_pred.name && b2.second == head_args))
        continue;
      std::vector<int> perm(static_cast<std::size_t>(n_vars));
      std::iota(perm.begin(), perm.end(), 0);
      std::string best;
      do {
        for (int order = 0; order < 2; ++order) {
          const auto& x = order ? b2 : b1;
          const auto& y = order ? b1 : b2;
          std::string s = render(x.first, x.second, perm) + render(y.first, y.second, perm);
          if (best.empty() || s < best) best = s;
        }
      } while (std::next_permutation(perm.begin() + head_pred.arity, perm.end()));
      keys.insert(best);
    }
  return keys;
}

LanguageSignature toy(std::vector<Predicate> preds) {
  LanguageSignature sig;
  sig.predicates = std::move(preds);
  sig.constants = {"a", "b"};
  return sig;
}

constexpr auto E = PredicateKind::extensional;
constexpr auto I = PredicateKind::invented;
constexpr auto A = PredicateKind::action;

}  // namespace

TEST(Enumerate, MatchesBruteForceOnToySignatures) {
  struct Case {
    std::vector<Predicate> preds;
    Predicate head;
    int exist;
    bool intensional;
  };
  const std::vector<Case> cases = {
      {{{"q", 1, E}, {"r", 2, E}, {"p", 1, I}}, {"p", 1, I}, 1, false},
      {{{"q", 1, E}, {"r", 2, E}, {"p", 1, I}}, {"p", 1, I}, 1, true},
      {{{"q", 1, E}, {"r", 2, E}, {"p", 2, I}}, {"p", 2, I}, 0, true},
      {{{"q", 1, E}, {"r", 2, E}, {"p", 2, I}}, {"p", 2, I}, 2, false},
      {{{"z", 0, E}, {"r", 2, E}, {"go", 0, A}}, {"go", 0, A}, 3, true},
      {{{"q", 1, E}, {"s", 2, E}, {"t", 2, E}, {"p", 1, I}, {"m", 2, A}}, {"m", 2, A}, 1, true},
      {{{"q", 1, E}, {"p", 1, I}, {"w", 2, I}}, {"w", 2, I}, 1, true},
  };
  for (const auto& c : cases) {
    ProgramSketch sketch;
    sketch.signature = toy(c.preds);
    for (const auto& p : c.preds)
      if (p.kind != E) sketch.entries.push_back({p, {c.exist, c.intensional, 1}});
    CandidateSet set = enumerate_candidates(sketch, c.head, {c.exist, c.intensional, 1});
    auto expected = brute_force(sketch.signature, c.head, c.exist, c.intensional);
    EXPECT_EQ(set.clauses.size(), expected.size()) << c.head.name;
    std::set<std::string> texts;
    for (const auto& cl : set.clauses) {
      texts.insert(format_clause(cl));
      EXPECT_EQ(canonicalize_clause(cl), cl);
    }
    EXPECT_EQ(texts.size(), set.clauses.size());
    EXPECT_TRUE(std::is_sorted(set.clauses.begin(), set.clauses.end(), [](const Clause& a, const Clause& b) {
      return format_clause(a) < format_clause(b);
    }));
  }
}

TEST(Enumerate, SlotCountsPerTask) {
  auto count = [](Task t) {
    return enumerate_program(make_sketch(make_variant(t, "training"), default_sketch_entries(t))).size();
  };
  EXPECT_EQ(count(Task::stack), 5u);
  EXPECT_EQ(count(Task::unstack), 5u);
  EXPECT_EQ(count(Task::on), 6u);
  EXPECT_EQ(count(Task::cliff), 8u);
  EXPECT_EQ(count(Task::windy_cliff), 8u);
}

TEST(Enumerate, ConstantIndependence) {
  for (Task t : all_tasks()) {
    auto small = enumerate_program(make_sketch(make_variant(t, "training"), default_sketch_entries(t)));
    auto large = enumerate_program(make_sketch(make_variant(t, is_blocks(t) ? "7-blocks" : "7x7"),
                                               default_sketch_entries(t)));
    ASSERT_EQ(small.size(), large.size());
    for (std::size_t s = 0; s < small.size(); ++s) EXPECT_EQ(small[s].clauses, large[s].clauses);
  }
}

TEST(Enumerate, Deterministic) {
  auto sketch = make_sketch(make_variant(Task::on, "training"), default_sketch_entries(Task::on));
  auto a = enumerate_program(sketch);
  auto b = enumerate_program(sketch);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    EXPECT_EQ(a[s].predicate, b[s].predicate);
    EXPECT_EQ(a[s].slot, b[s].slot);
    EXPECT_EQ(a[s].clauses, b[s].clauses);
  }
}

TEST(Enumerate, NoActionPredicateInAnyBody) {
  for (Task t : all_tasks()) {
    auto spec = make_variant(t, "training");
    auto sketch = make_sketch(spec, default_sketch_entries(t));
    for (const auto& set : enumerate_program(sketch))
      for (const auto& c : set.clauses)
        for (const auto& b : c.body)
          EXPECT_NE(sketch.signature.find(b.predicate)->kind, PredicateKind::action) << format_clause(c);
  }
}

namespace {

bool contains(const std::vector<CandidateSet>& sets, const std::string& text, const LanguageSignature& sig) {
  Clause c = canonicalize_clause(parse_clause(text, &sig));
  for (const auto& s : sets)
    if (s.predicate == c.head.predicate && std::find(s.clauses.begin(), s.clauses.end(), c) != s.clauses.end())
      return true;
  return false;
}

}  // namespace

// Induced rules quoted in the reference listings, with the anonymous "pred"
// names mapped onto the default pred1..pred4.
TEST(Enumerate, ReferenceRulesAreCandidates) {
  const std::vector<std::pair<Task, std::vector<std::string>>> rules = {
      {Task::stack,
       {"pred1(X,Y) :- on(X,Z), top(Y)", "pred2(X) :- on(X,Y), isFloor(Y)", "pred4(X,Y) :- pred2(X), pred1(Y,X)",
        "pred3(X) :- on(X,Y), pred1(Y,X)", "move(X,Y) :- pred3(Y), pred4(X,Y)"}},
      {Task::unstack,
       {"move(X,Y) :- isFloor(Y), pred3(X)", "pred3(X) :- pred2(X), top(X)", "pred2(X) :- on(X,Y), on(Y,Z)"}},
      {Task::on,
       {"move(X,Y) :- top(X), pred4(X,Y)", "move(X,Y) :- top(X), goalOn(X,Y)", "pred4(X,Y) :- isFloor(Y), pred2(X)",
        "pred2(X) :- on(X,Y), on(Y,Z)"}},
      {Task::cliff,
       {"right() :- current(X,Y), succ(Z,Y)", "down() :- pred2(X), last(X)", "down() :- current(X,Y), last(X)",
        "pred2(X) :- zero(Y), current(X,Z)", "left() :- current(X,Y), succ(X,X)", "up() :- current(X,Y), zero(Y)"}},
      {Task::windy_cliff,
       {"down() :- current(X,Y), last(X)", "right() :- current(X,Y), succ(Z,Y)",
        "right() :- current(X,Y), succ(Z,X)", "up() :- current(X,Y), zero(X)"}},
  };
  for (const auto& [task, list] : rules) {
    auto sketch = make_sketch(make_variant(task, "training"), default_sketch_entries(task));
    auto sets = enumerate_program(sketch);
    for (const auto& r : list) EXPECT_TRUE(contains(sets, r, sketch.signature)) << r;
  }
}

TEST(Enumerate, TemplateExamples) {
  auto cliff = make_sketch(make_variant(Task::cliff, "training"), default_sketch_entries(Task::cliff));
  CandidateSet up = enumerate_candidates(cliff, {"up", 0, A}, {3, true, 1});
  Clause want = canonicalize_clause(parse_clause("up() :- current(X,Y), zero(Y)"));
  EXPECT_NE(std::find(up.clauses.begin(), up.clauses.end(), want), up.clauses.end());

  auto blocks = make_sketch(make_variant(Task::stack, "training"), default_sketch_entries(Task::stack));
  CandidateSet p2 = enumerate_candidates(blocks, {"pred2", 1, I}, {1, false, 1});
  Clause want2 = canonicalize_clause(parse_clause("pred2(X) :- on(X,Y), isFloor(Y)"));
  EXPECT_NE(std::find(p2.clauses.begin(), p2.clauses.end(), want2), p2.clauses.end());
  for (const auto& c : p2.clauses)
    for (const auto& b : c.body) EXPECT_EQ(blocks.signature.find(b.predicate)->kind, E);
}

TEST(Enumerate, HeadNeverSupportsItself) {
  auto sketch = make_sketch(make_variant(Task::unstack, "training"), default_sketch_entries(Task::unstack));
  for (const auto& set : enumerate_program(sketch))
    for (const auto& c : set.clauses) {
      EXPECT_NE(c.body[0], c.head);
      EXPECT_NE(c.body[1], c.head);
    }
}

TEST(Enumerate, EmptyCandidateSet) {
  ProgramSketch sketch;
  sketch.signature = toy({{"p", 1, I}});
  sketch.entries = {{{"p", 1, I}, {0, false, 1}}};
  EXPECT_THROW(enumerate_candidates(sketch, {"p", 1, I}, {0, false, 1}), EmptyCandidateSetError);
}

TEST(Sketch, LinesRoundTrip) {
  for (Task t : all_tasks())
    for (const auto& e : default_sketch_entries(t)) EXPECT_EQ(parse_sketch_entry(format_sketch_entry(e)), e);
  SketchEntry e = parse_sketch_entry("invented pred1/2 exist=1 intensional=true clauses=1");
  EXPECT_EQ(e.predicate, (Predicate{"pred1", 2, I}));
  EXPECT_EQ(e.rule, (RuleTemplate{1, true, 1}));
  EXPECT_THROW(parse_sketch_entry("invented pred1 exist=1"), Error);
  EXPECT_THROW(parse_sketch_entry("invented pred1/2 exist=x"), Error);
}

TEST(Sketch, Validation) {
  ProgramSketch sketch;
  sketch.signature = toy({{"q", 1, E}, {"p", 1, I}});
  EXPECT_THROW(sketch.validate(), SignatureError);  // p has no template
  sketch.entries = {{{"q", 1, E}, {1, false, 1}}};
  EXPECT_THROW(sketch.validate(), SignatureError);  // extensional head
  sketch.entries = {{{"p", 1, I}, {1, false, 0}}};
  EXPECT_THROW(sketch.validate(), SignatureError);  // zero clauses
  sketch.entries = {{{"p", 1, I}, {1, false, 2}}};
  EXPECT_NO_THROW(sketch.validate());
  EXPECT_EQ(enumerate_program(sketch).size(), 2u);
}
