#pragma once

// Differentiable forward chaining over valuation vectors.
//
// Each clause slot holds a softmax distribution over its candidate clauses.
// One deduction step evaluates every candidate (fuzzy conjunction = product,
// substitutions amalgamated with max), mixes candidates by their weights,
// merges slots of the same predicate with the probabilistic sum, and adds the
// initial valuation back in. Reverse mode runs over a retained trace.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nlrl/logic.hpp"
#include "nlrl/templates.hpp"

namespace nlrl {

using Valuation = std::vector<double>;
using SlotWeights = std::vector<std::vector<double>>;

class GroundingSizeError : public Error {
 public:
  using Error::Error;
};

class StaleTraceError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kDefaultGroundAtomCap = 100000;

// ---------------------------------------------------------------------------

struct PredicateRange {
  std::size_t offset = 0;
  std::size_t count = 0;
};

// Dense bijection between ground atoms and [0, |G|). Each predicate owns a
// contiguous block laid out row-major over the constant list.
class GroundAtomTable {
 public:
  GroundAtomTable() = default;

  GroundAtomTable(const LanguageSignature& signature, std::size_t cap = kDefaultGroundAtomCap)
      : predicates_(signature.predicates), constants_(signature.constants) {
    if (constants_.empty()) throw Error("grounding requires at least one constant");
    for (std::size_t i = 0; i < constants_.size(); ++i) constant_ids_.emplace(constants_[i], static_cast<int>(i));
    std::size_t offset = 0;
    const std::size_t n = constants_.size();
    for (const auto& p : predicates_) {
      std::size_t count = 1;
      for (int k = 0; k < p.arity; ++k) count *= n;
      ranges_.push_back({offset, count});
      offset += count;
      if (offset > cap)
        throw GroundingSizeError("ground atom count exceeds cap of " + std::to_string(cap));
    }
    size_ = offset;
  }

  std::size_t size() const { return size_; }
  std::size_t constant_count() const { return constants_.size(); }
  const std::vector<std::string>& constants() const { return constants_; }
  const std::vector<Predicate>& predicates() const { return predicates_; }
  const PredicateRange& range(std::size_t predicate) const { return ranges_.at(predicate); }

  std::size_t predicate_index(std::string_view name) const {
    for (std::size_t i = 0; i < predicates_.size(); ++i)
      if (predicates_[i].name == name) return i;
    throw Error("unknown predicate '" + std::string(name) + "'");
  }

  int constant_id(std::string_view symbol) const {
    auto it = constant_ids_.find(std::string(symbol));
    if (it == constant_ids_.end()) throw Error("unknown constant '" + std::string(symbol) + "'");
    return it->second;
  }

  std::size_t index(std::size_t predicate, std::span<const int> args) const {
    const auto& r = ranges_[predicate];
    std::size_t local = 0;
    for (int a : args) local = local * constants_.size() + static_cast<std::size_t>(a);
    return r.offset + local;
  }

  std::size_t index(const GroundAtom& atom) const {
    std::size_t p = predicate_index(atom.predicate);
    if (static_cast<int>(atom.args.size()) != predicates_[p].arity)
      throw Error("arity mismatch for ground atom '" + format_ground_atom(atom) + "'");
    int ids[2] = {0, 0};
    for (std::size_t i = 0; i < atom.args.size(); ++i) ids[i] = constant_id(atom.args[i]);
    return index(p, std::span<const int>(ids, atom.args.size()));
  }

  GroundAtom atom(std::size_t index) const {
    for (std::size_t p = 0; p < predicates_.size(); ++p) {
      const auto& r = ranges_[p];
      if (index < r.offset || index >= r.offset + r.count) continue;
      std::size_t local = index - r.offset;
      GroundAtom g{predicates_[p].name, std::vector<std::string>(static_cast<std::size_t>(predicates_[p].arity))};
      for (int k = predicates_[p].arity - 1; k >= 0; --k) {
        g.args[static_cast<std::size_t>(k)] = constants_[local % constants_.size()];
        local /= constants_.size();
      }
      return g;
    }
    throw Error("ground atom index out of range");
  }

  Valuation valuation(std::span<const GroundAtom> atoms) const {
    Valuation e(size_, 0.0);
    for (const auto& a : atoms) e[index(a)] = 1.0;
    return e;
  }

 private:
  std::vector<Predicate> predicates_;
  std::vector<std::string> constants_;
  std::unordered_map<std::string, int> constant_ids_;
  std::vector<PredicateRange> ranges_;
  std::size_t size_ = 0;
};

// ---------------------------------------------------------------------------

// Substitution tables for every candidate of one clause slot. For candidate j
// and local head atom h, pairs [offsets[j*H+h], offsets[j*H+h+1]) list the
// (body1, body2) ground-atom indices of each distinct substitution, in
// enumeration order.
struct GroundedSlot {
  std::size_t predicate = 0;
  std::size_t head_offset = 0;
  std::size_t head_count = 0;
  std::size_t candidate_count = 0;
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> pairs;

  std::size_t pair_begin(std::size_t j, std::size_t h) const { return offsets[j * head_count + h]; }
  std::size_t pair_end(std::size_t j, std::size_t h) const { return offsets[j * head_count + h + 1]; }
};

struct PredicateGroup {
  std::size_t predicate = 0;
  std::vector<std::size_t> slots;
};

struct GroundedProgram {
  LanguageSignature signature;
  GroundAtomTable table;
  std::vector<CandidateSet> candidates;
  std::vector<GroundedSlot> slots;
  std::vector<PredicateGroup> groups;
  std::vector<std::size_t> action_atoms;  // ground indices, table order

  std::size_t slot_count() const { return slots.size(); }
};

namespace detail {

inline void ground_clause(const Clause& clause, std::size_t head_pred, std::size_t b1_pred, std::size_t b2_pred,
                          const GroundAtomTable& table, GroundedSlot& slot) {
  const std::size_t n = table.constant_count();
  const int n_vars = variable_count(clause);
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_head(slot.head_count);
  std::unordered_set<std::uint64_t> seen;

  auto args_of = [](const Atom& a, const std::vector<int>& sub, int* out) {
    for (std::size_t i = 0; i < a.args.size(); ++i) out[i] = sub[static_cast<std::size_t>(var_id(a.args[i]))];
    return std::span<const int>(out, a.args.size());
  };

  std::vector<int> sub(static_cast<std::size_t>(n_vars), 0);
  std::size_t total = 1;
  for (int v = 0; v < n_vars; ++v) total *= n;
  int hbuf[2], b1buf[2], b2buf[2];
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    for (int v = n_vars - 1; v >= 0; --v) {
      sub[static_cast<std::size_t>(v)] = static_cast<int>(rest % n);
      rest /= n;
    }
    std::size_t head = table.index(head_pred, args_of(clause.head, sub, hbuf)) - slot.head_offset;
    auto b1 = static_cast<std::uint32_t>(table.index(b1_pred, args_of(clause.body[0], sub, b1buf)));
    auto b2 = static_cast<std::uint32_t>(table.index(b2_pred, args_of(clause.body[1], sub, b2buf)));
    std::uint64_t key = (static_cast<std::uint64_t>(head) << 42) | (static_cast<std::uint64_t>(b1) << 21) | b2;
    if (seen.insert(key).second) per_head[head].emplace_back(b1, b2);
  }
  for (std::size_t h = 0; h < slot.head_count; ++h) {
    for (auto [a, b] : per_head[h]) {
      slot.pairs.push_back(a);
      slot.pairs.push_back(b);
    }
    slot.offsets.push_back(static_cast<std::uint32_t>(slot.pairs.size() / 2));
  }
}

}  // namespace detail

// Grounds every candidate of every slot over `constants`. Candidate order is
// untouched, so parameters transfer between constant sets.
inline GroundedProgram ground_program(const std::vector<CandidateSet>& candidates, const LanguageSignature& signature,
                                      const std::vector<std::string>& constants,
                                      std::size_t cap = kDefaultGroundAtomCap) {
  if (constants.empty()) throw Error("grounding requires at least one constant");
  GroundedProgram program;
  program.signature = signature;
  program.signature.constants = constants;
  program.table = GroundAtomTable(program.signature, cap);
  program.candidates = candidates;
  const auto& table = program.table;
  if (table.size() >= (std::size_t{1} << 21)) throw GroundingSizeError("ground atom universe too large to index");

  std::map<std::size_t, std::size_t> group_of;
  for (const auto& set : candidates) {
    GroundedSlot slot;
    slot.predicate = table.predicate_index(set.predicate);
    const auto& range = table.range(slot.predicate);
    slot.head_offset = range.offset;
    slot.head_count = range.count;
    slot.candidate_count = set.clauses.size();
    slot.offsets.reserve(set.clauses.size() * range.count + 1);
    slot.offsets.push_back(0);
    for (const auto& clause : set.clauses) {
      detail::ground_clause(clause, slot.predicate, table.predicate_index(clause.body[0].predicate),
                            table.predicate_index(clause.body[1].predicate), table, slot);
    }
    auto [it, fresh] = group_of.try_emplace(slot.predicate, program.groups.size());
    if (fresh) program.groups.push_back({slot.predicate, {}});
    program.groups[it->second].slots.push_back(program.slots.size());
    program.slots.push_back(std::move(slot));
  }
  for (std::size_t p = 0; p < table.predicates().size(); ++p) {
    if (table.predicates()[p].kind != PredicateKind::action) continue;
    const auto& r = table.range(p);
    for (std::size_t i = 0; i < r.count; ++i) program.action_atoms.push_back(r.offset + i);
  }
  return program;
}

// ---------------------------------------------------------------------------
// Parameters

namespace detail {
inline std::uint64_t next_parameter_version() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

inline std::vector<double> softmax_weights(std::span<const double> theta) {
  std::vector<double> w(theta.size());
  if (theta.empty()) return w;
  double mx = *std::max_element(theta.begin(), theta.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    w[i] = std::exp(theta[i] - mx);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

// Flat θ over all slots; every mutation bumps a process-unique version so a
// trace can tell whether it still matches the parameters.
class ClauseParameters {
 public:
  ClauseParameters() = default;

  explicit ClauseParameters(const std::vector<CandidateSet>& candidates) {
    offsets_.push_back(0);
    for (const auto& c : candidates) offsets_.push_back(offsets_.back() + c.clauses.size());
    theta_.assign(offsets_.back(), 0.0);
    version_ = detail::next_parameter_version();
  }

  static ClauseParameters normal(const std::vector<CandidateSet>& candidates, std::mt19937_64& rng,
                                 double stddev = 0.1) {
    ClauseParameters p(candidates);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& t : p.theta_) t = dist(rng);
    return p;
  }

  std::size_t slot_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t size() const { return theta_.size(); }
  std::size_t offset(std::size_t slot) const { return offsets_[slot]; }
  std::span<const double> slot(std::size_t s) const {
    return std::span<const double>(theta_).subspan(offsets_[s], offsets_[s + 1] - offsets_[s]);
  }
  std::span<const double> flat() const { return theta_; }
  std::span<double> mutable_flat() {
    version_ = detail::next_parameter_version();
    return theta_;
  }
  void set(std::size_t slot, std::size_t j, double value) {
    theta_.at(offsets_[slot] + j) = value;
    version_ = detail::next_parameter_version();
  }
  std::uint64_t version() const { return version_; }

  SlotWeights weights() const {
    SlotWeights w;
    w.reserve(slot_count());
    for (std::size_t s = 0; s < slot_count(); ++s) w.push_back(softmax_weights(slot(s)));
    return w;
  }

 private:
  std::vector<double> theta_;
  std::vector<std::size_t> offsets_;
  std::uint64_t version_ = 0;
};

// ---------------------------------------------------------------------------
// Forward

inline Valuation prob_sum(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("prob_sum: size mismatch");
  Valuation out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i] - a[i] * b[i];
  return out;
}

// h_{slot,j}(e): zero outside the head predicate's range.
inline Valuation clause_one_step(const GroundedProgram& program, std::size_t slot_index, std::size_t candidate,
                                 std::span<const double> e) {
  const auto& slot = program.slots.at(slot_index);
  Valuation out(program.table.size(), 0.0);
  for (std::size_t h = 0; h < slot.head_count; ++h) {
    double best = 0.0;
    for (std::size_t k = slot.pair_begin(candidate, h); k < slot.pair_end(candidate, h); ++k)
      best = std::max(best, e[slot.pairs[2 * k]] * e[slot.pairs[2 * k + 1]]);
    out[slot.head_offset + h] = best;
  }
  return out;
}

struct DeductionTrace {
  int steps = 0;
  std::uint64_t parameter_version = 0;
  const GroundedProgram* program = nullptr;
  SlotWeights weights;
  std::vector<Valuation> valuations;                    // e^(0) .. e^(T)
  std::vector<std::vector<double>> slot_outputs;        // [(t-1)*S + s], one entry per head atom
  std::vector<std::vector<std::uint32_t>> argmax;       // [(t-1)*S + s], pair index per (candidate, head)

  const Valuation& output() const { return valuations.back(); }
};

namespace detail {

inline void evaluate_slot(const GroundedSlot& slot, std::span<const double> w, const double* e, double* out,
                          std::uint32_t* argmax) {
  std::fill(out, out + slot.head_count, 0.0);
  const std::uint32_t* offsets = slot.offsets.data();
  const std::uint32_t* pairs = slot.pairs.data();
  const std::size_t H = slot.head_count;
  for (std::size_t j = 0; j < slot.candidate_count; ++j) {
    const double wj = w[j];
    const std::uint32_t* off = offsets + j * H;
    std::uint32_t* am = argmax + j * H;
    for (std::size_t h = 0; h < H; ++h) {
      std::uint32_t k = off[h];
      const std::uint32_t end = off[h + 1];
      std::uint32_t arg = k;
      double best = 0.0;
      if (k < end) {
        best = e[pairs[2 * k]] * e[pairs[2 * k + 1]];
        for (++k; k < end; ++k) {
          double v = e[pairs[2 * k]] * e[pairs[2 * k + 1]];
          if (v > best) {
            best = v;
            arg = k;
          }
        }
      }
      am[h] = arg;
      out[h] += wj * best;
    }
  }
}

inline void deduce_into(const GroundedProgram& program, const SlotWeights& weights, std::span<const double> e,
                        std::span<const double> e0, Valuation& next, std::vector<double>* slot_outputs,
                        std::vector<std::uint32_t>* argmax, std::vector<double>& complement) {
  next.assign(e0.begin(), e0.end());
  for (const auto& group : program.groups) {
    const auto& range = program.table.range(group.predicate);
    // Probabilistic sum across slots of the same predicate, accumulated as
    // the product of complements.
    complement.assign(range.count, 1.0);
    for (std::size_t s : group.slots) {
      const auto& slot = program.slots[s];
      std::vector<double>& out = slot_outputs[s];
      out.resize(slot.head_count);
      argmax[s].resize(slot.candidate_count * slot.head_count);
      evaluate_slot(slot, weights[s], e.data(), out.data(), argmax[s].data());
      for (std::size_t h = 0; h < range.count; ++h) complement[h] *= 1.0 - out[h];
    }
    for (std::size_t h = 0; h < range.count; ++h) {
      double v = (1.0 - complement[h]) + e0[range.offset + h];
      next[range.offset + h] = std::clamp(v, 0.0, 1.0);
    }
  }
}

}  // namespace detail

// g(e) with explicit slot weights.
inline Valuation step_deduce(std::span<const double> e, std::span<const double> e0, const SlotWeights& weights,
                             const GroundedProgram& program) {
  if (weights.size() != program.slots.size()) throw Error("slot weight count does not match grounded program");
  Valuation next;
  std::vector<std::vector<double>> outputs(program.slots.size());
  std::vector<std::vector<std::uint32_t>> argmax(program.slots.size());
  std::vector<double> complement;
  detail::deduce_into(program, weights, e, e0, next, outputs.data(), argmax.data(), complement);
  return next;
}

inline Valuation step_deduce(std::span<const double> e, std::span<const double> e0, const ClauseParameters& params,
                             const GroundedProgram& program) {
  return step_deduce(e, e0, params.weights(), program);
}

// f^T(e0). The trace's buffers are reused across calls.
inline const Valuation& forward(std::span<const double> e0, const SlotWeights& weights, const GroundedProgram& program,
                                int steps, DeductionTrace& trace, std::uint64_t parameter_version = 0) {
  if (steps < 0) throw Error("deduction depth must be non-negative");
  if (e0.size() != program.table.size()) throw Error("valuation size does not match grounded program");
  if (weights.size() != program.slots.size()) throw Error("slot weight count does not match grounded program");
  const std::size_t S = program.slots.size();
  trace.steps = steps;
  trace.parameter_version = parameter_version;
  trace.program = &program;
  trace.weights = weights;
  trace.valuations.resize(static_cast<std::size_t>(steps) + 1);
  trace.valuations[0].assign(e0.begin(), e0.end());
  trace.slot_outputs.resize(static_cast<std::size_t>(steps) * S);
  trace.argmax.resize(static_cast<std::size_t>(steps) * S);
  std::vector<double> complement;
  for (int t = 1; t <= steps; ++t) {
    const std::size_t base = static_cast<std::size_t>(t - 1) * S;
    detail::deduce_into(program, weights, trace.valuations[static_cast<std::size_t>(t - 1)], e0,
                        trace.valuations[static_cast<std::size_t>(t)], trace.slot_outputs.data() + base,
                        trace.argmax.data() + base, complement);
  }
  return trace.valuations.back();
}

inline const Valuation& forward(std::span<const double> e0, const ClauseParameters& params,
                                const GroundedProgram& program, int steps, DeductionTrace& trace) {
  return forward(e0, params.weights(), program, steps, trace, params.version());
}

// ---------------------------------------------------------------------------
// Backward

// Gradient of <output_gradient, f^T(e0)> with respect to every slot weight.
inline SlotWeights backward_weights(const DeductionTrace& trace, std::span<const double> output_gradient) {
  if (trace.program == nullptr) throw StaleTraceError("backward called without a forward trace");
  const GroundedProgram& program = *trace.program;
  const std::size_t n = program.table.size();
  if (output_gradient.size() != n) throw Error("output gradient size does not match grounded program");
  const std::size_t S = program.slots.size();

  SlotWeights grad(S);
  for (std::size_t s = 0; s < S; ++s) grad[s].assign(program.slots[s].candidate_count, 0.0);

  std::vector<double> G(output_gradient.begin(), output_gradient.end());
  std::vector<double> Gprev(n, 0.0);
  std::vector<double> gs;
  std::vector<double> complement;
  const Valuation& e0 = trace.valuations[0];

  for (int t = trace.steps; t >= 1; --t) {
    std::fill(Gprev.begin(), Gprev.end(), 0.0);
    const double* e = trace.valuations[static_cast<std::size_t>(t - 1)].data();
    const std::size_t base = static_cast<std::size_t>(t - 1) * S;
    for (const auto& group : program.groups) {
      const auto& range = program.table.range(group.predicate);
      complement.assign(range.count, 1.0);
      for (std::size_t s : group.slots)
        for (std::size_t h = 0; h < range.count; ++h) complement[h] *= 1.0 - trace.slot_outputs[base + s][h];
      for (std::size_t s : group.slots) {
        const auto& slot = program.slots[s];
        gs.assign(range.count, 0.0);
        bool any = false;
        for (std::size_t h = 0; h < range.count; ++h) {
          double g = G[range.offset + h];
          if (g == 0.0) continue;
          // Saturated clamp passes no gradient.
          if ((1.0 - complement[h]) + e0[range.offset + h] > 1.0) continue;
          double others = 1.0;
          if (group.slots.size() > 1)
            for (std::size_t m : group.slots)
              if (m != s) others *= 1.0 - trace.slot_outputs[base + m][h];
          gs[h] = g * others;
          any = any || gs[h] != 0.0;
        }
        if (!any) continue;
        const std::uint32_t* am = trace.argmax[base + s].data();
        const std::uint32_t* pairs = slot.pairs.data();
        const std::size_t H = slot.head_count;
        const auto& w = trace.weights[s];
        for (std::size_t j = 0; j < slot.candidate_count; ++j) {
          const double wj = w[j];
          double acc = 0.0;
          for (std::size_t h = 0; h < H; ++h) {
            const double g = gs[h];
            if (g == 0.0) continue;
            if (slot.pair_begin(j, h) == slot.pair_end(j, h)) continue;
            const std::uint32_t k = am[j * H + h];
            const std::uint32_t b1 = pairs[2 * k], b2 = pairs[2 * k + 1];
            acc += g * e[b1] * e[b2];
            const double gw = g * wj;
            Gprev[b1] += gw * e[b2];
            Gprev[b2] += gw * e[b1];
          }
          grad[s][j] += acc;
        }
      }
    }
    std::swap(G, Gprev);
  }
  return grad;
}

// Gradient with respect to θ through the softmax.
inline std::vector<double> backward(const DeductionTrace& trace, const ClauseParameters& params,
                                    std::span<const double> output_gradient) {
  if (trace.parameter_version != params.version())
    throw StaleTraceError("parameters changed since the forward pass");
  SlotWeights gw = backward_weights(trace, output_gradient);
  std::vector<double> out(params.size(), 0.0);
  for (std::size_t s = 0; s < gw.size(); ++s) {
    const auto& w = trace.weights[s];
    double dot = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) dot += w[j] * gw[s][j];
    for (std::size_t j = 0; j < w.size(); ++j) out[params.offset(s) + j] = w[j] * (gw[s][j] - dot);
  }
  return out;
}

}  // namespace nlrl
