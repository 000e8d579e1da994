#pragma once

// Experiment configuration: flat `key = value` lines, `#` comments, and
// embedded sketch lines (`invented ...` / `action ...`).

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "nlrl/agents.hpp"
#include "nlrl/eval.hpp"
#include "nlrl/training.hpp"

namespace nlrl {

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error("config line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class AgentKind { nlrl, mlp, random };

inline std::string_view agent_kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::nlrl: return "nlrl";
    case AgentKind::mlp: return "mlp";
    case AgentKind::random: return "random";
  }
  return "?";
}

inline AgentKind parse_agent_kind(std::string_view s) {
  if (s == "nlrl") return AgentKind::nlrl;
  if (s == "mlp") return AgentKind::mlp;
  if (s == "random") return AgentKind::random;
  throw Error("unknown agent '" + std::string(s) + "'; valid agents: nlrl, mlp, random");
}

struct ExperimentConfig {
  Task task = Task::unstack;
  std::string variant = "training";
  AgentKind agent = AgentKind::nlrl;
  std::vector<SketchEntry> sketch;  // empty: the task's default sketch
  int steps = kDefaultDeductionSteps;
  double init_stddev = 0.1;
  TrainConfig train;
  bool early_stop = true;
  int eval_episodes = kDefaultEvalEpisodes;
  std::string out = "runs/default";

  std::vector<SketchEntry> sketch_or_default() const {
    return sketch.empty() ? default_sketch_entries(task) : sketch;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v, std::size_t line, const std::string& key) {
  std::istringstream ss(v);
  T out{};
  if (!(ss >> out) || !(ss >> std::ws).eof()) throw ConfigError(line, "bad value '" + v + "' for '" + key + "'");
  return out;
}

}  // namespace detail

// Applies one `key = value` setting; also used for command-line overrides.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value,
                          std::size_t line = 0) {
  using detail::parse_number;
  try {
    if (key == "task") c.task = parse_task(value);
    else if (key == "variant") c.variant = value;
    else if (key == "agent") c.agent = parse_agent_kind(value);
    else if (key == "steps" || key == "T") c.steps = parse_number<int>(value, line, key);
    else if (key == "init_stddev") c.init_stddev = parse_number<double>(value, line, key);
    else if (key == "gamma") c.train.gamma = parse_number<double>(value, line, key);
    else if (key == "lambda") c.train.lambda = parse_number<double>(value, line, key);
    else if (key == "lr" || key == "learning_rate") c.train.optimizer.learning_rate = parse_number<double>(value, line, key);
    else if (key == "rmsprop_decay") c.train.optimizer.decay = parse_number<double>(value, line, key);
    else if (key == "rmsprop_epsilon") c.train.optimizer.epsilon = parse_number<double>(value, line, key);
    else if (key == "seed") c.train.seed = parse_number<std::uint64_t>(value, line, key);
    else if (key == "episodes") c.train.episodes = parse_number<int>(value, line, key);
    else if (key == "batch_size") c.train.batch_size = parse_number<int>(value, line, key);
    else if (key == "entropy") c.train.entropy_coef = parse_number<double>(value, line, key);
    else if (key == "normalize_advantages") c.train.normalize_advantages = detail::parse_bool(value);
    else if (key == "early_stop") c.early_stop = detail::parse_bool(value);
    else if (key == "early_stop_window") c.train.window = parse_number<int>(value, line, key);
    else if (key == "early_stop_tolerance") c.train.tolerance = parse_number<double>(value, line, key);
    else if (key == "max_seconds") c.train.max_seconds = parse_number<double>(value, line, key);
    else if (key == "eval_episodes") c.eval_episodes = parse_number<int>(value, line, key);
    else if (key == "out" || key == "output_dir") c.out = value;
    else throw ConfigError(line, "unknown key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(line, e.what());
  }
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig c = {}) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string text = raw.substr(0, raw.find('#'));
    text = detail::trim(text);
    if (text.empty()) continue;
    if (text.rfind("invented ", 0) == 0 || text.rfind("action ", 0) == 0) {
      try {
        c.sketch.push_back(parse_sketch_entry(text));
      } catch (const Error& e) {
        throw ConfigError(line, e.what());
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
    apply_setting(c, detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)), line);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig c = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  return parse_config(in, std::move(c));
}

}  // namespace nlrl
