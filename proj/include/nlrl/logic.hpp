#pragma once

// Function-free, negation-free Datalog vocabulary: predicates, terms, atoms,
// two-atom-body clauses, and the signature that fixes the ground-atom universe.

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace nlrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class SignatureError : public Error {
 public:
  using Error::Error;
};

enum class PredicateKind { extensional, invented, action };

inline std::string_view kind_name(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::extensional: return "extensional";
    case PredicateKind::invented: return "invented";
    case PredicateKind::action: return "action";
  }
  return "?";
}

inline PredicateKind parse_kind(std::string_view text) {
  if (text == "extensional") return PredicateKind::extensional;
  if (text == "invented") return PredicateKind::invented;
  if (text == "action") return PredicateKind::action;
  throw Error("unknown predicate kind '" + std::string(text) + "'");
}

struct Predicate {
  std::string name;
  int arity = 0;
  PredicateKind kind = PredicateKind::extensional;

  bool operator==(const Predicate&) const = default;
};

struct Variable {
  int id = 0;
  auto operator<=>(const Variable&) const = default;
};

struct Constant {
  std::string symbol;
  auto operator<=>(const Constant&) const = default;
};

using Term = std::variant<Variable, Constant>;

struct Atom {
  std::string predicate;
  std::vector<Term> args;

  auto operator<=>(const Atom&) const = default;
  bool operator==(const Atom&) const = default;
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  auto operator<=>(const GroundAtom&) const = default;
  bool operator==(const GroundAtom&) const = default;
};

// Clauses never contain constants and always have exactly two body atoms.
// Variables are numbered 0,1,2,... in first-occurrence order (head, then body).
struct Clause {
  Atom head;
  std::array<Atom, 2> body;

  bool operator==(const Clause&) const = default;
};

struct LanguageSignature {
  std::vector<Predicate> predicates;
  std::vector<std::string> constants;
  std::vector<GroundAtom> background;

  const Predicate* find(std::string_view name) const {
    for (const auto& p : predicates)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < predicates.size(); ++i)
      if (predicates[i].name == name) return i;
    return std::nullopt;
  }

  void validate() const {
    std::set<std::string> names;
    for (const auto& p : predicates) {
      if (!names.insert(p.name).second) throw SignatureError("duplicate predicate '" + p.name + "'");
      if (p.arity < 0 || p.arity > 2)
        throw SignatureError("predicate '" + p.name + "' has arity " + std::to_string(p.arity) +
                             "; only 0, 1 or 2 are supported");
    }
    std::set<std::string> consts(constants.begin(), constants.end());
    if (consts.size() != constants.size()) throw SignatureError("duplicate constant in signature");
    for (const auto& g : background) {
      const Predicate* p = find(g.predicate);
      if (p == nullptr) throw SignatureError("background atom uses unknown predicate '" + g.predicate + "'");
      if (p->kind != PredicateKind::extensional)
        throw SignatureError("background atom uses non-extensional predicate '" + g.predicate + "'");
      if (static_cast<int>(g.args.size()) != p->arity)
        throw SignatureError("background atom '" + g.predicate + "' has wrong arity");
      for (const auto& a : g.args)
        if (!consts.count(a)) throw SignatureError("background atom uses undeclared constant '" + a + "'");
    }
  }
};

// ---------------------------------------------------------------------------
// Helpers

inline bool is_variable(const Term& t) { return std::holds_alternative<Variable>(t); }

inline int var_id(const Term& t) {
  if (const auto* v = std::get_if<Variable>(&t)) return v->id;
  throw Error("clause term is a constant: '" + std::get<Constant>(t).symbol + "'");
}

inline Atom make_atom(std::string predicate, std::initializer_list<int> vars) {
  Atom a{std::move(predicate), {}};
  for (int v : vars) a.args.emplace_back(Variable{v});
  return a;
}

inline int variable_count(const Clause& c) {
  int n = 0;
  auto scan = [&](const Atom& a) {
    for (const auto& t : a.args) n = std::max(n, var_id(t) + 1);
  };
  scan(c.head);
  scan(c.body[0]);
  scan(c.body[1]);
  return n;
}

inline std::string variable_name(int id) {
  static constexpr std::array<const char*, 3> kNames = {"X", "Y", "Z"};
  if (id >= 0 && id < 3) return kNames[static_cast<std::size_t>(id)];
  return "V" + std::to_string(id);
}

// ---------------------------------------------------------------------------
// Printing

inline std::string format_atom(const Atom& a) {
  std::string out = a.predicate + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ",";
    if (const auto* v = std::get_if<Variable>(&a.args[i]))
      out += variable_name(v->id);
    else
      out += std::get<Constant>(a.args[i]).symbol;
  }
  return out + ")";
}

inline std::string format_ground_atom(const GroundAtom& g) {
  std::string out = g.predicate + "(";
  for (std::size_t i = 0; i < g.args.size(); ++i) {
    if (i) out += ",";
    out += g.args[i];
  }
  return out + ")";
}

inline std::string format_clause(const Clause& c) {
  return format_atom(c.head) + " :- " + format_atom(c.body[0]) + ", " + format_atom(c.body[1]);
}

// ---------------------------------------------------------------------------
// Canonicalization

namespace detail {

// Renumbers variables in first-occurrence order over head, body[0], body[1].
inline Clause renumber(const Clause& c) {
  std::map<int, int> mapping;
  auto remap = [&](const Atom& a) {
    Atom out{a.predicate, {}};
    out.args.reserve(a.args.size());
    for (const auto& t : a.args) {
      int id = var_id(t);
      auto [it, inserted] = mapping.try_emplace(id, static_cast<int>(mapping.size()));
      out.args.emplace_back(Variable{it->second});
    }
    return out;
  };
  Clause out;
  out.head = remap(c.head);
  out.body[0] = remap(c.body[0]);
  out.body[1] = remap(c.body[1]);
  return out;
}

inline bool atom_less(const Atom& a, const Atom& b) {
  if (a.predicate != b.predicate) return a.predicate < b.predicate;
  return a.args < b.args;
}

}  // namespace detail

// Equal up to variable renaming and body permutation <=> equal canonical forms.
inline Clause canonicalize_clause(const Clause& c) {
  Clause first = detail::renumber(c);
  Clause swapped = c;
  std::swap(swapped.body[0], swapped.body[1]);
  swapped = detail::renumber(swapped);
  auto key_less = [](const Clause& a, const Clause& b) {
    if (detail::atom_less(a.body[0], b.body[0])) return true;
    if (detail::atom_less(b.body[0], a.body[0])) return false;
    return detail::atom_less(a.body[1], b.body[1]);
  };
  return key_less(swapped, first) ? swapped : first;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class ClauseLexer {
 public:
  explicit ClauseLexer(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  std::size_t position() const { return pos_; }

  bool try_consume(std::string_view token) {
    skip_ws();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!try_consume(token)) throw ParseError("expected '" + std::string(token) + "'", pos_);
  }

  std::string identifier() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (start == pos_) throw ParseError("expected identifier", pos_);
    return std::string(text_.substr(start, pos_ - start));
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

struct RawAtom {
  std::string predicate;
  std::vector<std::string> args;
  std::size_t position = 0;
};

inline RawAtom parse_raw_atom(ClauseLexer& lex) {
  lex.skip_ws();
  RawAtom atom;
  atom.position = lex.position();
  atom.predicate = lex.identifier();
  if (!std::islower(static_cast<unsigned char>(atom.predicate[0])))
    throw ParseError("predicate names must start with a lowercase letter", atom.position);
  if (!lex.try_consume("(")) return atom;  // bare nullary atom
  if (lex.try_consume(")")) return atom;
  while (true) {
    atom.args.push_back(lex.identifier());
    if (lex.try_consume(")")) break;
    lex.expect(",");
  }
  return atom;
}

}  // namespace detail

// Accepts `head :- b1, b2` (or `<-` / `←`). Variables are uppercase-initial;
// constants are rejected because clauses are constant-free.
inline Clause parse_clause(std::string_view text, const LanguageSignature* signature = nullptr) {
  detail::ClauseLexer lex(text);
  detail::RawAtom head = detail::parse_raw_atom(lex);
  if (!lex.try_consume(":-") && !lex.try_consume("<-") && !lex.try_consume("←"))
    throw ParseError("expected ':-'", lex.position());
  std::vector<detail::RawAtom> body;
  body.push_back(detail::parse_raw_atom(lex));
  while (lex.try_consume(",")) body.push_back(detail::parse_raw_atom(lex));
  lex.try_consume(".");
  if (!lex.at_end()) throw ParseError("unexpected trailing input", lex.position());
  if (body.size() != 2)
    throw ParseError("clause body must have exactly 2 atoms, found " + std::to_string(body.size()), 0);

  std::map<std::string, int> arities;
  std::map<std::string, int> vars;
  auto convert = [&](const detail::RawAtom& raw) {
    if (signature != nullptr) {
      const Predicate* p = signature->find(raw.predicate);
      if (p == nullptr) throw ParseError("unknown predicate '" + raw.predicate + "'", raw.position);
      if (p->arity != static_cast<int>(raw.args.size()))
        throw ParseError("arity mismatch for '" + raw.predicate + "': expected " + std::to_string(p->arity) +
                             ", got " + std::to_string(raw.args.size()),
                         raw.position);
    }
    auto [it, inserted] = arities.try_emplace(raw.predicate, static_cast<int>(raw.args.size()));
    if (!inserted && it->second != static_cast<int>(raw.args.size()))
      throw ParseError("arity mismatch for '" + raw.predicate + "'", raw.position);
    Atom atom{raw.predicate, {}};
    for (const auto& name : raw.args) {
      if (!std::isupper(static_cast<unsigned char>(name[0])))
        throw ParseError("clauses may not contain constants ('" + name + "')", raw.position);
      auto [v, fresh] = vars.try_emplace(name, static_cast<int>(vars.size()));
      atom.args.emplace_back(Variable{v->second});
    }
    return atom;
  };
  Clause c;
  c.head = convert(head);
  c.body[0] = convert(body[0]);
  c.body[1] = convert(body[1]);
  return c;
}

// `pred(c1,c2)` with lowercase or numeric constants.
inline GroundAtom parse_ground_atom(std::string_view text) {
  detail::ClauseLexer lex(text);
  detail::RawAtom raw = detail::parse_raw_atom(lex);
  if (!lex.at_end()) throw ParseError("unexpected trailing input", lex.position());
  for (const auto& a : raw.args)
    if (std::isupper(static_cast<unsigned char>(a[0])))
      throw ParseError("ground atom contains variable '" + a + "'", raw.position);
  return GroundAtom{raw.predicate, raw.args};
}

}  // namespace nlrl
