#pragma once

// Policies that act in an Environment: the logic policy (state encoder ->
// T-step deduction -> action decoder), the MLP baseline, and uniform random.

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nlrl/deduction.hpp"
#include "nlrl/envs.hpp"
#include "nlrl/nn.hpp"
#include "nlrl/templates.hpp"

namespace nlrl {

inline constexpr int kDefaultDeductionSteps = 4;

// ---------------------------------------------------------------------------
// Sketches

inline std::vector<SketchEntry> default_sketch_entries(Task task) {
  std::vector<std::string> lines = {
      "invented pred1/2 exist=1 intensional=true clauses=1",
      "invented pred2/1 exist=2 intensional=false clauses=1",
      "invented pred3/1 exist=1 intensional=true clauses=1",
      "invented pred4/2 exist=0 intensional=true clauses=1",
  };
  switch (task) {
    case Task::stack:
    case Task::unstack: lines.push_back("action move/2 exist=1 intensional=true clauses=1"); break;
    case Task::on:
      lines.push_back("action move/2 exist=1 intensional=true clauses=1");
      lines.push_back("action move/2 exist=0 intensional=true clauses=1");
      break;
    case Task::cliff:
    case Task::windy_cliff:
      for (const char* a : {"up", "down", "left", "right"})
        lines.push_back(std::string("action ") + a + "/0 exist=3 intensional=true clauses=1");
      break;
  }
  std::vector<SketchEntry> entries;
  for (const auto& l : lines) entries.push_back(parse_sketch_entry(l));
  return entries;
}

// Signature order: extensional, invented (first-appearance order), action.
inline ProgramSketch make_sketch(const TaskSpec& spec, const std::vector<SketchEntry>& entries) {
  ProgramSketch sketch;
  sketch.signature = spec.signature;
  for (const auto& e : entries) {
    if (e.predicate.kind == PredicateKind::action) {
      bool known = false;
      for (const auto& a : spec.action_predicates) known = known || a == e.predicate;
      if (!known)
        throw SignatureError("action predicate '" + e.predicate.name + "/" + std::to_string(e.predicate.arity) +
                             "' does not belong to task " + std::string(task_name(spec.task)));
      continue;
    }
    if (sketch.signature.find(e.predicate.name) == nullptr) sketch.signature.predicates.push_back(e.predicate);
  }
  for (const auto& a : spec.action_predicates) sketch.signature.predicates.push_back(a);
  sketch.entries = entries;
  sketch.validate();
  return sketch;
}

// ---------------------------------------------------------------------------
// The trainable logic program

struct NlrlModel {
  Task task = Task::unstack;
  int steps = kDefaultDeductionSteps;
  std::vector<SketchEntry> entries;
  LanguageSignature signature;  // training signature (with invented/action predicates)
  std::vector<CandidateSet> candidates;
  ClauseParameters params;
  std::optional<SlotWeights> fixed_weights;  // replaces softmax(θ) when set

  static NlrlModel create(const TaskSpec& spec, std::vector<SketchEntry> entries, int steps, std::mt19937_64& rng,
                          double init_stddev = 0.1) {
    NlrlModel m;
    m.task = spec.task;
    m.steps = steps;
    m.entries = std::move(entries);
    ProgramSketch sketch = make_sketch(spec, m.entries);
    m.signature = sketch.signature;
    m.candidates = enumerate_program(sketch);
    m.params = ClauseParameters::normal(m.candidates, rng, init_stddev);
    return m;
  }

  SlotWeights weights() const { return fixed_weights ? *fixed_weights : params.weights(); }

  // Grounds the (unchanged) candidates over a variant's constants.
  std::shared_ptr<const GroundedProgram> ground(const TaskSpec& spec) const {
    ProgramSketch sketch = make_sketch(spec, entries);
    return std::make_shared<const GroundedProgram>(ground_program(candidates, sketch.signature,
                                                                  spec.signature.constants));
  }
};

// ---------------------------------------------------------------------------
// Checkpoints

inline void save_nlrl_checkpoint(const NlrlModel& m, std::ostream& out) {
  out << "nlrl-checkpoint v1\n";
  out << "task " << task_name(m.task) << "\n";
  out << "steps " << m.steps << "\n";
  out << "signature\n";
  for (const auto& p : m.signature.predicates)
    out << "predicate " << p.name << ' ' << p.arity << ' ' << kind_name(p.kind) << '\n';
  out << "constants";
  for (const auto& c : m.signature.constants) out << ' ' << c;
  out << '\n';
  for (const auto& g : m.signature.background) out << "background " << format_ground_atom(g) << '\n';
  out << "end\n";
  out << "sketch\n";
  for (const auto& e : m.entries) out << format_sketch_entry(e) << '\n';
  out << "end\n";
  char buf[32];
  for (std::size_t s = 0; s < m.candidates.size(); ++s) {
    const auto& set = m.candidates[s];
    out << "slot " << set.predicate << ' ' << set.slot << ' ' << set.clauses.size() << '\n';
    for (const auto& c : set.clauses) out << format_clause(c) << '\n';
    out << "theta";
    for (double t : m.params.slot(s)) {
      std::snprintf(buf, sizeof buf, "%.17g", t);
      out << ' ' << buf;
    }
    out << '\n';
  }
  out << "end\n";
}

inline NlrlModel load_nlrl_checkpoint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw Error("truncated checkpoint at line " + std::to_string(line_no + 1));
    ++line_no;
    return line;
  };
  auto fail = [&](const std::string& what) {
    return Error("checkpoint line " + std::to_string(line_no) + ": " + what);
  };
  if (next() != "nlrl-checkpoint v1") throw fail("expected header 'nlrl-checkpoint v1'");
  NlrlModel m;
  std::string word;
  {
    std::istringstream ss(next());
    std::string name;
    if (!(ss >> word >> name) || word != "task") throw fail("expected 'task <name>'");
    m.task = parse_task(name);
  }
  {
    std::istringstream ss(next());
    if (!(ss >> word >> m.steps) || word != "steps") throw fail("expected 'steps <T>'");
  }
  if (next() != "signature") throw fail("expected 'signature'");
  while (next() != "end") {
    std::istringstream ss(line);
    ss >> word;
    if (word == "predicate") {
      Predicate p;
      std::string kind;
      if (!(ss >> p.name >> p.arity >> kind)) throw fail("malformed predicate line");
      p.kind = parse_kind(kind);
      m.signature.predicates.push_back(p);
    } else if (word == "constants") {
      std::string c;
      while (ss >> c) m.signature.constants.push_back(c);
    } else if (word == "background") {
      std::string atom;
      ss >> atom;
      m.signature.background.push_back(parse_ground_atom(atom));
    } else {
      throw fail("unexpected '" + word + "' in signature block");
    }
  }
  if (next() != "sketch") throw fail("expected 'sketch'");
  while (next() != "end") m.entries.push_back(parse_sketch_entry(line));

  std::vector<std::vector<double>> thetas;
  while (next() != "end") {
    std::istringstream ss(line);
    CandidateSet set;
    std::size_t count = 0;
    if (!(ss >> word >> set.predicate >> set.slot >> count) || word != "slot") throw fail("expected slot header");
    for (std::size_t i = 0; i < count; ++i) {
      try {
        set.clauses.push_back(parse_clause(next(), &m.signature));
      } catch (const ParseError& e) {
        throw fail(e.what());
      }
    }
    std::istringstream ts(next());
    ts >> word;
    if (word != "theta") throw fail("expected theta line");
    std::vector<double> theta;
    double v;
    while (ts >> v) theta.push_back(v);
    if (theta.size() != count) throw fail("theta has " + std::to_string(theta.size()) + " values, expected " +
                                          std::to_string(count));
    m.candidates.push_back(std::move(set));
    thetas.push_back(std::move(theta));
  }
  m.params = ClauseParameters(m.candidates);
  auto flat = m.params.mutable_flat();
  std::size_t k = 0;
  for (const auto& t : thetas)
    for (double v : t) flat[k++] = v;
  return m;
}

inline void save_nlrl_checkpoint(const NlrlModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  save_nlrl_checkpoint(m, out);
}

inline NlrlModel load_nlrl_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return load_nlrl_checkpoint(in);
}

// ---------------------------------------------------------------------------
// State features for the neural baselines

inline constexpr std::size_t kBlocksGrid = kMaxBlocks;
inline constexpr std::size_t kBlocksFeatureSize = kBlocksGrid * kBlocksGrid * kBlocksGrid;
inline constexpr std::size_t kBlocksActionUnits = (kMaxBlocks + 1) * (kMaxBlocks + 1);

// Blocks: X[x][y][i] = 1 iff block i sits in column x at height y, flattened
// as (x*7 + y)*7 + i. Cliff: the raw (x, y) coordinates.
inline std::vector<double> state_features(const EnvState& state) {
  if (const auto* b = std::get_if<BlocksState>(&state)) {
    std::vector<double> f(kBlocksFeatureSize, 0.0);
    for (std::size_t x = 0; x < b->columns.size(); ++x)
      for (std::size_t y = 0; y < b->columns[x].size(); ++y)
        f[(x * kBlocksGrid + y) * kBlocksGrid + static_cast<std::size_t>(b->columns[x][y])] = 1.0;
    return f;
  }
  const auto& c = std::get<CliffState>(state);
  return {static_cast<double>(c.x), static_cast<double>(c.y)};
}

inline std::size_t feature_size(Task task) { return is_blocks(task) ? kBlocksFeatureSize : 2; }

// ---------------------------------------------------------------------------
// Acting interface

struct GradientRequest {
  bool score = false;    // ∇ log π(a|s)
  bool entropy = false;  // ∇ H(π(·|s))
};

struct ActResult {
  std::size_t action = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<double> probs;
  std::vector<double> score;
  std::vector<double> entropy_grad;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string_view name() const = 0;
  virtual ActResult act(const EnvState& state, Rng& rng, GradientRequest request = {}) = 0;
  virtual std::unique_ptr<Agent> clone() const = 0;
  // Trainable parameters, empty for the random agent.
  virtual std::span<double> mutable_parameters() { return {}; }
  virtual std::size_t parameter_count() const { return 0; }
};

namespace detail {

inline double entropy_of(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

}  // namespace detail

class NlrlAgent : public Agent {
 public:
  NlrlAgent(std::shared_ptr<NlrlModel> model, const TaskSpec& spec)
      : model_(std::move(model)), spec_(spec), program_(model_->ground(spec)) {}

  std::string_view name() const override { return "nlrl"; }

  ActResult act(const EnvState& state, Rng& rng, GradientRequest request = {}) override {
    encode_valuation(state, spec_, program_->table, e0_);
    Visit& v = visit(e0_);

    ActResult r;
    r.probs = v.probs;
    r.action = rng.categorical(r.probs);
    r.log_prob = std::log(r.probs[r.action]);
    r.entropy = detail::entropy_of(r.probs);
    if (request.score) {
      auto it = v.scores.find(r.action);
      if (it == v.scores.end()) {
        std::vector<double> dp(v.vals.size(), 0.0);
        dp[r.action] = 1.0 / r.probs[r.action];
        it = v.scores.emplace(r.action, theta_gradient(v, dp)).first;
      }
      r.score = it->second;
    }
    if (request.entropy) {
      if (v.entropy_grad.empty()) {
        std::vector<double> dp(v.vals.size());
        for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = r.probs[i] > 0.0 ? -(std::log(r.probs[i]) + 1.0) : 0.0;
        v.entropy_grad = theta_gradient(v, dp);
      }
      r.entropy_grad = v.entropy_grad;
    }
    return r;
  }

  std::unique_ptr<Agent> clone() const override { return std::make_unique<NlrlAgent>(*this); }
  std::span<double> mutable_parameters() override { return model_->params.mutable_flat(); }
  std::size_t parameter_count() const override { return model_->params.size(); }

  const GroundedProgram& program() const { return *program_; }
  const NlrlModel& model() const { return *model_; }

 private:
  // Deduction results for one input valuation under the current parameters.
  // Episodes revisit states a lot, so forward passes and score gradients are
  // memoized until the parameters change.
  struct Visit {
    std::shared_ptr<DeductionTrace> trace;
    std::vector<double> vals;
    std::vector<double> probs;
    std::map<std::size_t, std::vector<double>> scores;
    std::vector<double> entropy_grad;
  };

  Visit& visit(const Valuation& e0) {
    const std::uint64_t version = model_->params.version();
    // Traces are large on the 7-block programs; 64 covers a whole episode.
    if (model_->fixed_weights || version != cache_version_ || cache_.size() >= 64) {
      cache_.clear();
      cache_version_ = version;
    }
    auto it = cache_.find(e0);
    if (it != cache_.end()) return it->second;
    Visit v;
    v.trace = std::make_shared<DeductionTrace>();
    const Valuation& out = forward(e0, model_->weights(), *program_, model_->steps, *v.trace, version);
    const auto& atoms = program_->action_atoms;
    v.vals.resize(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) v.vals[i] = out[atoms[i]];
    v.probs = action_distribution(v.vals);
    return cache_.emplace(e0, std::move(v)).first->second;
  }

  std::vector<double> theta_gradient(const Visit& v, std::span<const double> grad_probs) const {
    if (model_->fixed_weights) throw Error("fixed-weight programs have no trainable parameters");
    std::vector<double> dl = action_distribution_backward(v.vals, grad_probs);
    std::vector<double> dout(program_->table.size(), 0.0);
    for (std::size_t i = 0; i < dl.size(); ++i) dout[program_->action_atoms[i]] = dl[i];
    return backward(*v.trace, model_->params, dout);
  }

  std::shared_ptr<NlrlModel> model_;
  TaskSpec spec_;
  std::shared_ptr<const GroundedProgram> program_;
  Valuation e0_;
  std::map<Valuation, Visit> cache_;
  std::uint64_t cache_version_ = 0;
};

// Maps a variant's action indices onto the fixed output layer of the MLP so
// the same network acts on every problem size.
inline std::vector<std::size_t> mlp_action_units(const TaskSpec& spec) {
  std::vector<std::size_t> units;
  if (is_blocks(spec.task)) {
    const int n = spec.n_blocks + 1;
    auto unit = [&](int e) { return e == spec.n_blocks ? static_cast<std::size_t>(kMaxBlocks) : static_cast<std::size_t>(e); };
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) units.push_back(unit(x) * (kMaxBlocks + 1) + unit(y));
  } else {
    units = {0, 1, 2, 3};
  }
  return units;
}

inline std::size_t mlp_output_size(Task task) { return is_blocks(task) ? kBlocksActionUnits : 4; }

inline Mlp make_policy_mlp(Task task, std::mt19937_64& rng) {
  Mlp net({feature_size(task), 20, 10, mlp_output_size(task)});
  net.init_glorot(rng);
  return net;
}

inline Mlp make_value_net(Task task, std::mt19937_64& rng) {
  Mlp net({feature_size(task), 20, 1});
  net.init_glorot(rng);
  return net;
}

class MlpAgent : public Agent {
 public:
  MlpAgent(std::shared_ptr<Mlp> net, const TaskSpec& spec) : net_(std::move(net)), units_(mlp_action_units(spec)) {
    if (net_->output_size() <= *std::max_element(units_.begin(), units_.end()))
      throw DimensionError("policy network output layer too small for this task");
  }

  std::string_view name() const override { return "mlp"; }

  ActResult act(const EnvState& state, Rng& rng, GradientRequest request = {}) override {
    std::vector<double> x = state_features(state);
    Mlp::Cache cache;
    std::vector<double> logits = net_->forward(x, &cache);
    ActResult r;
    r.probs = masked_softmax(logits, units_);
    r.action = rng.categorical(r.probs);
    r.log_prob = std::log(r.probs[r.action]);
    r.entropy = detail::entropy_of(r.probs);
    auto backprop = [&](std::span<const double> dlogits_masked) {
      std::vector<double> dlogits(net_->output_size(), 0.0);
      for (std::size_t i = 0; i < units_.size(); ++i) dlogits[units_[i]] = dlogits_masked[i];
      std::vector<double> g(net_->parameters().size(), 0.0);
      net_->backward(cache, dlogits, g);
      return g;
    };
    if (request.score) {
      // d log softmax_a / d z_i = 1[i=a] - p_i
      std::vector<double> d(r.probs.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = (i == r.action ? 1.0 : 0.0) - r.probs[i];
      r.score = backprop(d);
    }
    if (request.entropy) {
      // dH/dz_i = -p_i (log p_i + H)
      std::vector<double> d(r.probs.size());
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = r.probs[i] > 0.0 ? -r.probs[i] * (std::log(r.probs[i]) + r.entropy) : 0.0;
      r.entropy_grad = backprop(d);
    }
    return r;
  }

  std::unique_ptr<Agent> clone() const override { return std::make_unique<MlpAgent>(*this); }
  std::span<double> mutable_parameters() override { return net_->parameters(); }
  std::size_t parameter_count() const override { return net_->parameters().size(); }
  const Mlp& network() const { return *net_; }

 private:
  std::shared_ptr<Mlp> net_;
  std::vector<std::size_t> units_;
};

class RandomAgent : public Agent {
 public:
  explicit RandomAgent(const TaskSpec& spec) : n_(spec.action_count()) {}

  std::string_view name() const override { return "random"; }

  ActResult act(const EnvState&, Rng& rng, GradientRequest = {}) override {
    ActResult r;
    r.probs.assign(n_, 1.0 / static_cast<double>(n_));
    r.action = rng.uniform_index(n_);
    r.log_prob = std::log(r.probs[r.action]);
    r.entropy = std::log(static_cast<double>(n_));
    return r;
  }

  std::unique_ptr<Agent> clone() const override { return std::make_unique<RandomAgent>(*this); }

 private:
  std::size_t n_;
};

// ---------------------------------------------------------------------------
// MLP policy checkpoints

inline void save_mlp_checkpoint(const Mlp& net, Task task, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << "nlrl-mlp-agent v1\ntask " << task_name(task) << '\n';
  net.save(out, "policy");
}

inline std::pair<Task, Mlp> load_mlp_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::string line, word, name;
  std::getline(in, line);
  if (line != "nlrl-mlp-agent v1") throw Error("'" + path + "' is not an MLP agent checkpoint");
  std::getline(in, line);
  std::istringstream ss(line);
  ss >> word >> name;
  if (word != "task") throw Error("MLP checkpoint missing task line");
  return {parse_task(name), Mlp::load(in, "policy")};
}

// Value baseline: features -> 20 -> 1, squared-error regression.
inline double value_predict(const Mlp& net, std::span<const double> features) { return net.forward(features)[0]; }

inline double value_update(Mlp& net, RmsProp& optimizer, std::span<const std::vector<double>> features,
                           std::span<const double> targets) {
  if (features.size() != targets.size()) throw DimensionError("value update: feature/target count mismatch");
  if (features.empty()) return 0.0;
  std::vector<double> grad(net.parameters().size(), 0.0);
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(features.size());
  Mlp::Cache cache;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double v = net.forward(features[i], &cache)[0];
    double diff = v - targets[i];
    loss += diff * diff * scale;
    double d[1] = {2.0 * diff * scale};
    net.backward(cache, d, grad);
  }
  optimizer.step(net.parameters(), grad);
  return loss;
}

}  // namespace nlrl
