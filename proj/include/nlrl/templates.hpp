#pragma once

// Candidate-clause enumeration for trainable rule slots.

#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlrl/logic.hpp"

namespace nlrl {

struct RuleTemplate {
  int n_existential = 0;
  bool allow_intensional = false;
  int n_clauses = 1;

  bool operator==(const RuleTemplate&) const = default;
};

struct SketchEntry {
  Predicate predicate;
  RuleTemplate rule;

  bool operator==(const SketchEntry&) const = default;
};

// Every invented and action predicate of the signature must have at least one
// entry. A predicate may appear in several entries (each adds its own slots),
// which is how a predicate gets clause slots with different templates.
struct ProgramSketch {
  LanguageSignature signature;
  std::vector<SketchEntry> entries;

  void validate() const {
    signature.validate();
    for (const auto& e : entries) {
      const Predicate* p = signature.find(e.predicate.name);
      if (p == nullptr) throw SignatureError("sketch entry for unknown predicate '" + e.predicate.name + "'");
      if (!(*p == e.predicate)) throw SignatureError("sketch entry for '" + e.predicate.name + "' disagrees with signature");
      if (p->kind == PredicateKind::extensional)
        throw SignatureError("extensional predicate '" + p->name + "' cannot head a clause slot");
      if (e.rule.n_existential < 0) throw SignatureError("negative existential count for '" + p->name + "'");
      if (e.rule.n_clauses < 1) throw SignatureError("clause count must be >= 1 for '" + p->name + "'");
    }
    for (const auto& p : signature.predicates) {
      if (p.kind == PredicateKind::extensional) continue;
      bool found = false;
      for (const auto& e : entries) found = found || e.predicate.name == p.name;
      if (!found) throw SignatureError("predicate '" + p.name + "' has no template in the sketch");
    }
  }
};

struct CandidateSet {
  std::string predicate;
  int slot = 0;  // slot index among the slots defining `predicate`
  std::vector<Clause> clauses;
};

// ---------------------------------------------------------------------------
// Sketch lines: `invented pred1/2 exist=1 intensional=true clauses=1`

inline std::string format_sketch_entry(const SketchEntry& e) {
  std::ostringstream os;
  os << kind_name(e.predicate.kind) << ' ' << e.predicate.name << '/' << e.predicate.arity
     << " exist=" << e.rule.n_existential << " intensional=" << (e.rule.allow_intensional ? "true" : "false")
     << " clauses=" << e.rule.n_clauses;
  return os.str();
}

namespace detail {

inline int parse_int(std::string_view s, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error("invalid integer '" + std::string(s) + "' for " + std::string(what));
  return value;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "True" || s == "1") return true;
  if (s == "false" || s == "False" || s == "0") return false;
  throw Error("invalid boolean '" + std::string(s) + "'");
}

}  // namespace detail

inline SketchEntry parse_sketch_entry(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string kind, decl;
  if (!(in >> kind >> decl)) throw Error("malformed sketch line: '" + std::string(line) + "'");
  SketchEntry e;
  e.predicate.kind = parse_kind(kind);
  if (e.predicate.kind == PredicateKind::extensional) throw Error("sketch lines declare invented or action predicates");
  auto slash = decl.find('/');
  if (slash == std::string::npos) throw Error("expected name/arity in sketch line: '" + decl + "'");
  e.predicate.name = decl.substr(0, slash);
  e.predicate.arity = detail::parse_int(std::string_view(decl).substr(slash + 1), "arity");
  std::string field;
  while (in >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos) throw Error("expected key=value in sketch line: '" + field + "'");
    std::string_view key = std::string_view(field).substr(0, eq);
    std::string_view value = std::string_view(field).substr(eq + 1);
    if (key == "exist")
      e.rule.n_existential = detail::parse_int(value, "exist");
    else if (key == "intensional")
      e.rule.allow_intensional = detail::parse_bool(value);
    else if (key == "clauses")
      e.rule.n_clauses = detail::parse_int(value, "clauses");
    else
      throw Error("unknown sketch field '" + std::string(key) + "'");
  }
  return e;
}

// ---------------------------------------------------------------------------
// Enumeration

class EmptyCandidateSetError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void all_atoms(const Predicate& p, int n_vars, std::vector<Atom>& out) {
  if (p.arity == 0) {
    out.push_back(Atom{p.name, {}});
  } else if (p.arity == 1) {
    for (int a = 0; a < n_vars; ++a) out.push_back(make_atom(p.name, {a}));
  } else {
    for (int a = 0; a < n_vars; ++a)
      for (int b = 0; b < n_vars; ++b) out.push_back(make_atom(p.name, {a, b}));
  }
}

}  // namespace detail

// All canonical clauses with head `predicate(X0..Xk)` whose two body atoms use
// head variables plus at most `rule.n_existential` fresh ones. Sorted by text.
inline CandidateSet enumerate_candidates(const ProgramSketch& sketch, const Predicate& predicate,
                                         const RuleTemplate& rule) {
  if (predicate.kind == PredicateKind::extensional)
    throw SignatureError("cannot enumerate clauses for extensional predicate '" + predicate.name + "'");
  const int n_vars = predicate.arity + rule.n_existential;

  std::vector<Atom> body_atoms;
  for (const auto& p : sketch.signature.predicates) {
    if (p.kind == PredicateKind::action) continue;
    if (p.kind == PredicateKind::invented && !rule.allow_intensional) continue;
    detail::all_atoms(p, n_vars, body_atoms);
  }

  Atom head{predicate.name, {}};
  for (int v = 0; v < predicate.arity; ++v) head.args.emplace_back(Variable{v});

  std::map<std::string, Clause> unique;
  for (std::size_t i = 0; i < body_atoms.size(); ++i) {
    if (body_atoms[i] == head) continue;
    for (std::size_t j = i; j < body_atoms.size(); ++j) {
      if (body_atoms[j] == head) continue;
      Clause c = canonicalize_clause(Clause{head, {body_atoms[i], body_atoms[j]}});
      unique.try_emplace(format_clause(c), std::move(c));
    }
  }
  if (unique.empty())
    throw EmptyCandidateSetError("template for '" + predicate.name + "' admits no candidate clauses");

  CandidateSet set;
  set.predicate = predicate.name;
  set.clauses.reserve(unique.size());
  for (auto& [text, clause] : unique) set.clauses.push_back(std::move(clause));
  return set;
}

inline std::vector<CandidateSet> enumerate_program(const ProgramSketch& sketch) {
  sketch.validate();
  std::vector<CandidateSet> out;
  std::map<std::string, int> slot_counter;
  for (const auto& entry : sketch.entries) {
    CandidateSet base = enumerate_candidates(sketch, entry.predicate, entry.rule);
    for (int k = 0; k < entry.rule.n_clauses; ++k) {
      CandidateSet s = base;
      s.slot = slot_counter[entry.predicate.name]++;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace nlrl
