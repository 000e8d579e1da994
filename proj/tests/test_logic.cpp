#include <gtest/gtest.h>

#include <random>

#include "nlrl/agents.hpp"
#include "nlrl/logic.hpp"
#include "nlrl/templates.hpp"

using namespace nlrl;

TEST(ParseClause, OnRuleWithTwoBodyAtoms) {
  Clause c = parse_clause("move(X,Y) :- top(X), goalOn(X,Y)");
  EXPECT_EQ(c.head, make_atom("move", {0, 1}));
  EXPECT_EQ(c.body[0], make_atom("top", {0}));
  EXPECT_EQ(c.body[1], make_atom("goalOn", {0, 1}));
}

TEST(ParseClause, NullaryHeadWithExistentials) {
  Clause c = parse_clause("up() :- current(X,Y), zero(Y)");
  EXPECT_TRUE(c.head.args.empty());
  EXPECT_EQ(c.body[0], make_atom("current", {0, 1}));
  EXPECT_EQ(c.body[1], make_atom("zero", {1}));
  EXPECT_EQ(variable_count(c), 2);
}

TEST(ParseClause, ArrowSpellings) {
  Clause a = parse_clause("pred2(X) :- on(X,Y), isFloor(Y)");
  EXPECT_EQ(parse_clause("pred2(X) <- on(X,Y), isFloor(Y)"), a);
  EXPECT_EQ(parse_clause("pred2(X) ← on(X,Y),isFloor(Y)"), a);
  EXPECT_EQ(parse_clause("pred2(X) :- on(X,Y), isFloor(Y)."), a);
}

TEST(ParseClause, UnclosedParenthesisReportsPosition) {
  try {
    parse_clause("p(X) :- q(X");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 11u);
  }
}

TEST(ParseClause, Errors) {
  EXPECT_THROW(parse_clause("p(X) :- q(X)"), ParseError);              // one body atom
  EXPECT_THROW(parse_clause("p(X) :- q(X), r(X), s(X)"), ParseError);  // three
  EXPECT_THROW(parse_clause("p(a) :- q(X), r(X)"), ParseError);        // constant
  EXPECT_THROW(parse_clause("p(X) :- q(X), q(X,Y)"), ParseError);      // inconsistent arity
  EXPECT_THROW(parse_clause("p(X) q(X), r(X)"), ParseError);
  EXPECT_THROW(parse_clause("p(X) :- q(X), r(X) extra"), ParseError);

  LanguageSignature sig;
  sig.predicates = {{"q", 1, PredicateKind::extensional}, {"p", 1, PredicateKind::invented}};
  EXPECT_NO_THROW(parse_clause("p(X) :- q(X), q(Y)", &sig));
  EXPECT_THROW(parse_clause("p(X) :- q(X), r(X)", &sig), ParseError);     // unknown predicate
  EXPECT_THROW(parse_clause("p(X) :- q(X,Y), q(X)", &sig), ParseError);   // arity vs signature
}

TEST(FormatClause, ReferenceNotation) {
  Clause c{make_atom("pred2", {0}), {make_atom("on", {0, 1}), make_atom("isFloor", {1})}};
  EXPECT_EQ(format_clause(c), "pred2(X) :- on(X,Y), isFloor(Y)");
  Clause d{make_atom("down", {}), {make_atom("current", {0, 1}), make_atom("last", {0})}};
  EXPECT_EQ(format_clause(d), "down() :- current(X,Y), last(X)");
  Clause e{make_atom("p", {0}), {make_atom("q", {3, 4}), make_atom("r", {0})}};
  EXPECT_EQ(format_clause(e), "p(X) :- q(V3,V4), r(X)");
}

TEST(FormatClause, CanonicalStringsRoundTrip) {
  for (const char* text : {"pred2(X) :- isFloor(Y), on(X,Y)", "down() :- current(X,Y), last(X)",
                           "move(X,Y) :- goalOn(X,Y), top(X)"}) {
    EXPECT_EQ(format_clause(parse_clause(text)), text);
  }
}

TEST(Canonicalize, RenamesHeadFirstAndSortsBody) {
  Clause c = canonicalize_clause(parse_clause("p(A) :- r(B), q(B,A)"));
  EXPECT_EQ(format_clause(c), "p(X) :- q(Y,X), r(Y)");
}

TEST(Canonicalize, PermutationAndRenamingInvariance) {
  EXPECT_EQ(canonicalize_clause(parse_clause("p(X) :- r(Y), q(X,Y)")),
            canonicalize_clause(parse_clause("p(A) :- q(A,B), r(B)")));
}

TEST(Canonicalize, IdempotentOnCanonicalClause) {
  Clause c = parse_clause("p(X) :- q(X,Y), r(Y)");
  EXPECT_EQ(canonicalize_clause(c), c);
}

namespace {

Clause random_clause(std::mt19937_64& rng) {
  const std::vector<std::pair<std::string, int>> preds = {{"a", 0}, {"b", 1}, {"c", 1}, {"d", 2}, {"e", 2}};
  std::uniform_int_distribution<std::size_t> pick(0, preds.size() - 1);
  std::uniform_int_distribution<int> var(0, 4);
  auto atom = [&](std::pair<std::string, int> p) {
    Atom a{p.first, {}};
    for (int i = 0; i < p.second; ++i) a.args.emplace_back(Variable{var(rng)});
    return a;
  };
  Clause c;
  const int head_arity = static_cast<int>(rng() % 3);
  c.head = Atom{"h", {}};
  for (int i = 0; i < head_arity; ++i) c.head.args.emplace_back(Variable{var(rng)});
  c.body[0] = atom(preds[pick(rng)]);
  c.body[1] = atom(preds[pick(rng)]);
  return c;
}

Clause rename(const Clause& c, const std::vector<int>& perm) {
  auto map_atom = [&](const Atom& a) {
    Atom out{a.predicate, {}};
    for (const auto& t : a.args) out.args.emplace_back(Variable{perm[static_cast<std::size_t>(var_id(t))]});
    return out;
  };
  return Clause{map_atom(c.head), {map_atom(c.body[0]), map_atom(c.body[1])}};
}

}  // namespace

TEST(Canonicalize, RandomClausesProperties) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    Clause c = random_clause(rng);
    Clause canon = canonicalize_clause(c);
    EXPECT_EQ(canonicalize_clause(canon), canon);

    std::vector<int> perm = {5, 6, 7, 8, 9};
    std::shuffle(perm.begin(), perm.end(), rng);
    Clause renamed = rename(c, perm);
    std::swap(renamed.body[0], renamed.body[1]);
    EXPECT_EQ(canonicalize_clause(renamed), canon) << format_clause(c);
  }
}

TEST(RoundTrip, EveryEnumeratedCandidate) {
  for (Task t : all_tasks()) {
    TaskSpec spec = make_variant(t, "training");
    ProgramSketch sketch = make_sketch(spec, default_sketch_entries(t));
    for (const auto& set : enumerate_program(sketch))
      for (const auto& c : set.clauses) {
        ASSERT_EQ(parse_clause(format_clause(c), &sketch.signature), c) << format_clause(c);
        for (const Atom* a : {&c.head, &c.body[0], &c.body[1]}) {
          EXPECT_EQ(static_cast<int>(a->args.size()), sketch.signature.find(a->predicate)->arity);
          for (const auto& term : a->args) EXPECT_TRUE(is_variable(term));
        }
      }
  }
}

TEST(Signature, ValidationRejectsBadSignatures) {
  LanguageSignature sig;
  sig.predicates = {{"on", 2, PredicateKind::extensional}, {"on", 1, PredicateKind::extensional}};
  EXPECT_THROW(sig.validate(), SignatureError);
  sig.predicates = {{"big", 3, PredicateKind::extensional}};
  EXPECT_THROW(sig.validate(), SignatureError);
  sig.predicates = {{"on", 2, PredicateKind::extensional}, {"p", 1, PredicateKind::invented}};
  sig.constants = {"a", "b"};
  sig.background = {{"on", {"a", "c"}}};
  EXPECT_THROW(sig.validate(), SignatureError);
  sig.background = {{"p", {"a"}}};
  EXPECT_THROW(sig.validate(), SignatureError);
  sig.background = {{"on", {"a", "b"}}};
  EXPECT_NO_THROW(sig.validate());
}

TEST(GroundAtom, ParseAndFormat) {
  GroundAtom g = parse_ground_atom("succ(0,1)");
  EXPECT_EQ(g.predicate, "succ");
  EXPECT_EQ(g.args, (std::vector<std::string>{"0", "1"}));
  EXPECT_EQ(format_ground_atom(g), "succ(0,1)");
  EXPECT_THROW(parse_ground_atom("on(X,a)"), ParseError);
}
