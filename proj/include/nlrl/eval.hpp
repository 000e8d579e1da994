#pragma once

// Evaluation harness: seeded rollouts, the generalization suite, readable
// rule listings and Table-1 shaped reports.

#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "nlrl/agents.hpp"
#include "nlrl/oracle.hpp"
#include "nlrl/training.hpp"

namespace nlrl {

inline constexpr int kDefaultEvalEpisodes = 500;
inline constexpr double kDefaultRuleThreshold = 0.3;

struct EvalConfig {
  int episodes = kDefaultEvalEpisodes;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> returns;
};

inline EvalResult summarize(std::vector<double> returns) {
  EvalResult r;
  if (returns.empty()) return r;
  double sum = 0.0;
  for (double x : returns) sum += x;
  r.mean = sum / static_cast<double>(returns.size());
  double sq = 0.0;
  for (double x : returns) sq += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(sq / static_cast<double>(returns.size()));
  r.returns = std::move(returns);
  return r;
}

// Episode i always uses the same streams, whatever the worker count.
inline EvalResult evaluate(const Agent& agent, const TaskSpec& spec, const EvalConfig& cfg = {}) {
  if (cfg.episodes < 0) throw Error("episode count must be non-negative");
  std::vector<double> returns(static_cast<std::size_t>(cfg.episodes));
  auto run = [&](Agent& a, int i) {
    const std::uint64_t base = derive_seed(cfg.seed, "eval", static_cast<std::uint64_t>(i));
    Environment env(spec, derive_seed(base, "wind"));
    Rng rng(base);
    returns[static_cast<std::size_t>(i)] = collect_episode(a, env, rng).total_return;
  };
  const int workers = std::max(1, std::min(cfg.workers, cfg.episodes));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    auto body = [&, w] {
      try {
        auto local = agent.clone();
        for (int i = w; i < cfg.episodes; i += workers) run(*local, i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    };
    if (workers == 1)
      body();
    else
      threads.emplace_back(body);
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return summarize(std::move(returns));
}

// ---------------------------------------------------------------------------
// Reports

struct EvalRow {
  Task task = Task::unstack;
  std::string variant;
  std::string agent;
  double mean = 0.0;
  double std = 0.0;
  int episodes = 0;
  double optimal = std::numeric_limits<double>::quiet_NaN();
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

inline Task parse_task_label(std::string_view label) {
  for (Task t : all_tasks())
    if (task_display_name(t) == label || task_name(t) == label) return t;
  return parse_task(label);
}

inline std::string format_fixed3(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  std::string s = buf;
  return s == "-0.000" ? "0.000" : s;
}

inline void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "task,variant,agent,mean,std,episodes,optimal\n";
  for (const auto& r : report.rows)
    out << task_display_name(r.task) << ',' << r.variant << ',' << r.agent << ',' << format_fixed3(r.mean) << ','
        << format_fixed3(r.std) << ',' << r.episodes << ',' << format_fixed3(r.optimal) << '\n';
}

inline EvalReport parse_report_csv(std::istream& in) {
  EvalReport report;
  std::string line;
  if (!std::getline(in, line) || line != "task,variant,agent,mean,std,episodes,optimal")
    throw Error("report CSV has an unexpected header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw Error("report CSV line " + std::to_string(line_no) + ": expected 7 fields");
    try {
      EvalRow r;
      r.task = parse_task_label(f[0]);
      r.variant = f[1];
      r.agent = f[2];
      r.mean = std::stod(f[3]);
      r.std = std::stod(f[4]);
      r.episodes = std::stoi(f[5]);
      if (!f[6].empty()) r.optimal = std::stod(f[6]);
      report.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error("report CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return report;
}

// One line per (task, variant) with an NLRL / MLP / Random / Optimal column
// each, in first-appearance order.
inline std::string render_report_table(const EvalReport& report) {
  struct Line {
    std::string task, variant;
    std::map<std::string, std::string> cells;
    std::string optimal;
  };
  std::vector<Line> lines;
  std::vector<std::string> agents;
  for (const auto& r : report.rows) {
    const std::string task(task_display_name(r.task));
    auto it = std::find_if(lines.begin(), lines.end(),
                           [&](const Line& l) { return l.task == task && l.variant == r.variant; });
    if (it == lines.end()) {
      lines.push_back({task, r.variant, {}, ""});
      it = std::prev(lines.end());
    }
    it->cells[r.agent] = format_fixed3(r.mean) + "±" + format_fixed3(r.std);
    if (!std::isnan(r.optimal)) it->optimal = format_fixed3(r.optimal);
    if (std::find(agents.begin(), agents.end(), r.agent) == agents.end()) agents.push_back(r.agent);
  }
  // Canonical column order, then anything else.
  std::vector<std::string> columns;
  for (const char* a : {"nlrl", "mlp", "random"})
    if (std::find(agents.begin(), agents.end(), a) != agents.end()) columns.emplace_back(a);
  for (const auto& a : agents)
    if (std::find(columns.begin(), columns.end(), a) == columns.end()) columns.push_back(a);

  auto header_of = [](const std::string& a) {
    if (a == "nlrl") return std::string("NLRL");
    if (a == "mlp") return std::string("MLP");
    if (a == "random") return std::string("Random");
    return a;
  };
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> head = {"Task", "Variant"};
  for (const auto& c : columns) head.push_back(header_of(c));
  head.emplace_back("Optimal");
  table.push_back(head);
  for (const auto& l : lines) {
    std::vector<std::string> row = {l.task, l.variant};
    for (const auto& c : columns) row.push_back(l.cells.count(c) ? l.cells.at(c) : "-");
    row.push_back(l.optimal.empty() ? "-" : l.optimal);
    table.push_back(row);
  }
  // "±" is two bytes but one column wide.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(head.size(), 0);
  for (const auto& row : table)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
  std::ostringstream out;
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i];
      if (i + 1 < row.size()) out << std::string(widths[i] - width(row[i]) + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Generalization suite

using AgentFactory = std::function<std::unique_ptr<Agent>(const TaskSpec&)>;

// Optimal returns are memoized per (task, variant); value iteration on the
// 7-block instances takes a few seconds.
inline double cached_optimal_return(Task task, const std::string& variant) {
  static std::mutex mu;
  static std::map<std::pair<Task, std::string>, double> cache;
  {
    std::lock_guard lock(mu);
    auto it = cache.find({task, variant});
    if (it != cache.end()) return it->second;
  }
  const double v = optimal_return(make_variant(task, variant));
  std::lock_guard lock(mu);
  cache[{task, variant}] = v;
  return v;
}

inline EvalReport generalization_suite(const AgentFactory& factory, Task task, const EvalConfig& cfg = {},
                                       bool with_optimal = true) {
  EvalReport report;
  for (const auto& variant : task_variants(task)) {
    TaskSpec spec = make_variant(task, variant);
    auto agent = factory(spec);
    EvalResult r = evaluate(*agent, spec, cfg);
    EvalRow row;
    row.task = task;
    row.variant = variant;
    row.agent = std::string(agent->name());
    row.mean = r.mean;
    row.std = r.std;
    row.episodes = cfg.episodes;
    if (with_optimal) row.optimal = cached_optimal_return(task, variant);
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline AgentFactory nlrl_factory(std::shared_ptr<NlrlModel> model) {
  return [model](const TaskSpec& spec) { return std::make_unique<NlrlAgent>(model, spec); };
}

inline AgentFactory mlp_factory(std::shared_ptr<Mlp> net) {
  return [net](const TaskSpec& spec) { return std::make_unique<MlpAgent>(net, spec); };
}

inline AgentFactory random_factory() {
  return [](const TaskSpec& spec) { return std::make_unique<RandomAgent>(spec); };
}

// ---------------------------------------------------------------------------
// Rule listings

inline constexpr std::size_t kUnknownSlot = static_cast<std::size_t>(-1);

struct RuleLine {
  double weight = 0.0;
  Clause clause;
  std::size_t slot = kUnknownSlot;  // index into the model's candidate sets
  std::size_t candidate = 0;        // index within that set
};

// Per slot, every candidate whose weight exceeds `threshold`, heaviest first.
inline std::vector<RuleLine> extract_rules(const NlrlModel& model, double threshold = kDefaultRuleThreshold) {
  std::vector<RuleLine> out;
  const SlotWeights w = model.weights();
  for (std::size_t s = 0; s < model.candidates.size(); ++s) {
    std::vector<RuleLine> slot;
    for (std::size_t j = 0; j < w[s].size(); ++j)
      if (w[s][j] > threshold) slot.push_back({w[s][j], model.candidates[s].clauses[j], s, j});
    std::stable_sort(slot.begin(), slot.end(), [](const RuleLine& a, const RuleLine& b) { return a.weight > b.weight; });
    out.insert(out.end(), slot.begin(), slot.end());
  }
  return out;
}

inline std::string format_rules(const std::vector<RuleLine>& rules) {
  std::ostringstream out;
  char buf[32];
  for (const auto& r : rules) {
    std::snprintf(buf, sizeof buf, "%.3f: ", r.weight);
    out << buf << format_clause(r.clause) << '\n';
  }
  return out.str();
}

// Reads `weight: clause` lines back; slot/candidate are left unset.
inline std::vector<RuleLine> parse_rules(std::istream& in, const LanguageSignature* signature = nullptr) {
  std::vector<RuleLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos || line.compare(colon, 2, ":-") == 0)
      throw ParseError("rule line " + std::to_string(line_no) + ": expected '<weight>: <clause>'", 0);
    RuleLine r;
    try {
      r.weight = std::stod(line.substr(0, colon));
    } catch (const std::logic_error&) {
      throw ParseError("rule line " + std::to_string(line_no) + ": bad weight", 0);
    }
    r.clause = parse_clause(std::string_view(line).substr(colon + 1), signature);
    out.push_back(std::move(r));
  }
  return out;
}

// Turns a listing into deterministic slot weights. A rule with a known slot
// selects its clause there; a parsed rule takes the first still-free slot of
// its head predicate that lists it. Slots that receive no rule stay all-zero
// and derive nothing.
inline SlotWeights one_hot_program(const NlrlModel& model, const std::vector<RuleLine>& rules) {
  SlotWeights w;
  for (const auto& set : model.candidates) w.emplace_back(set.clauses.size(), 0.0);
  std::vector<bool> taken(model.candidates.size(), false);
  for (const auto& rule : rules) {
    const std::string text = format_clause(canonicalize_clause(rule.clause));
    bool placed = false;
    for (std::size_t s = 0; s < model.candidates.size() && !placed; ++s) {
      if (rule.slot != kUnknownSlot && rule.slot != s) continue;
      if (taken[s] || model.candidates[s].predicate != rule.clause.head.predicate) continue;
      const auto& clauses = model.candidates[s].clauses;
      for (std::size_t j = 0; j < clauses.size(); ++j) {
        if (format_clause(clauses[j]) != text) continue;
        w[s][j] = 1.0;
        taken[s] = true;
        placed = true;
        break;
      }
    }
    // Lower-weight alternatives for an already chosen slot are dropped.
  }
  return w;
}

}  // namespace nlrl
