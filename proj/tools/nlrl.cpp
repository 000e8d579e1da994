// nlrl: train / eval / rules / oracle / reproduce.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "nlrl/experiment.hpp"

using namespace nlrl;

namespace {

int default_workers() {
  if (const char* env = std::getenv("NLRL_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void write_report(const EvalReport& report, const std::string& path) {
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_report_csv(report, out);
}

void append(EvalReport& into, const EvalReport& from) {
  into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> settings;
  std::string task, variant, agent, out, lr;
  long long seed = -1;
  int episodes = -1;
  int workers = default_workers();
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  auto set = [&](const char* key, const std::string& v) {
    if (!v.empty()) apply_setting(cfg, key, v);
  };
  set("task", a.task);
  set("variant", a.variant);
  set("agent", a.agent);
  set("out", a.out);
  set("lr", a.lr);
  if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  if (a.episodes >= 0) cfg.train.episodes = a.episodes;
  for (const auto& s : a.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
  }
  cfg.train.workers = a.workers;

  int printed = 0;
  TrainOutcome o = run_training(cfg, [&](const TrainLogRow& r) {
    if (a.quiet) return;
    if (r.episode / 500 > printed) {
      printed = r.episode / 500;
      std::printf("episode %d  return %.3f  %.0fs\n", r.episode, r.mean_return, r.seconds);
      std::fflush(stdout);
    }
  });
  std::printf("trained %d episodes in %.1fs%s\ncheckpoint: %s\nlog: %s\n", o.result.episodes, o.result.seconds,
              o.result.early_stopped ? " (early stop)" : "", o.checkpoint.c_str(), o.log.c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint, task, variant = "training", agent, out = "report.csv";
  bool suite = false;
  int episodes = kDefaultEvalEpisodes;
  std::uint64_t seed = 0;
  int workers = default_workers();
};

int cmd_eval(const EvalArgs& a) {
  TrainedAgent agent;
  if (!a.checkpoint.empty()) {
    if (!std::filesystem::exists(a.checkpoint)) throw Error("checkpoint '" + a.checkpoint + "' not found");
    agent = load_trained_agent(a.checkpoint);
    if (!a.task.empty() && parse_task(a.task) != agent.task)
      throw Error("checkpoint was trained on " + std::string(task_name(agent.task)) + ", not " + a.task);
  } else if (a.agent == "random") {
    if (a.task.empty()) throw Error("--task is required for the random agent");
    agent.kind = AgentKind::random;
    agent.task = parse_task(a.task);
  } else {
    throw Error("eval needs --checkpoint (or --agent random --task <task>)");
  }
  EvalConfig ec{a.episodes, a.seed, a.workers};
  EvalReport report;
  if (a.suite) {
    report = generalization_suite(agent.factory(), agent.task, ec);
  } else {
    TaskSpec spec = make_variant(agent.task, a.variant);
    auto ag = agent.factory()(spec);
    EvalResult r = evaluate(*ag, spec, ec);
    report.rows.push_back({agent.task, a.variant, std::string(ag->name()), r.mean, r.std, a.episodes,
                           cached_optimal_return(agent.task, a.variant)});
  }
  write_report(report, a.out);
  std::cout << render_report_table(report) << "report: " << a.out << '\n';
  return 0;
}

int cmd_rules(const std::string& checkpoint, double threshold, const std::string& out) {
  TrainedAgent agent = load_trained_agent(checkpoint);
  if (agent.kind != AgentKind::nlrl) throw Error("rule extraction needs an NLRL checkpoint");
  const std::string listing = format_rules(extract_rules(*agent.nlrl, threshold));
  std::cout << listing;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw Error("cannot write '" + out + "'");
    f << listing;
  }
  return 0;
}

int cmd_oracle(const std::string& task, const std::string& variant, bool all) {
  const Task t = parse_task(task);
  std::vector<std::string> variants = all ? task_variants(t) : std::vector<std::string>{variant};
  for (const auto& v : variants) {
    const double value = optimal_return(make_variant(t, v));
    if (all)
      std::printf("%s %.3f\n", v.c_str(), value);
    else
      std::printf("%.3f\n", value);
  }
  return 0;
}

struct ReproduceArgs {
  std::string task = "all";
  int seeds = 1;
  std::string out = "runs/reproduce";
  int episodes = kDefaultEvalEpisodes;
  int train_episodes = 30000;
  int workers = default_workers();
  bool skip_mlp = false;
};

// Best of the seeds by training-environment evaluation.
TrainedAgent best_of_seeds(Task task, AgentKind kind, const ReproduceArgs& a) {
  TrainedAgent best;
  double best_mean = -std::numeric_limits<double>::infinity();
  const TaskSpec training = make_variant(task, "training");
  for (int s = 0; s < a.seeds; ++s) {
    ExperimentConfig cfg;
    cfg.task = task;
    cfg.agent = kind;
    cfg.train.seed = static_cast<std::uint64_t>(s);
    cfg.train.episodes = a.train_episodes;
    cfg.train.workers = a.workers;
    cfg.out = a.out + "/" + std::string(task_name(task)) + "/" + std::string(agent_kind_name(kind)) + "-seed" +
              std::to_string(s);
    bool resumed = false;
    std::printf("[%s/%s seed %d] ", std::string(task_name(task)).c_str(), std::string(agent_kind_name(kind)).c_str(), s);
    std::fflush(stdout);
    TrainedAgent agent = train_or_resume(cfg, &resumed);
    auto ag = agent.factory()(training);
    const double mean = evaluate(*ag, training, {a.episodes, 0, a.workers}).mean;
    std::printf("%s, training return %.3f\n", resumed ? "resumed" : "trained", mean);
    if (mean > best_mean) {
      best_mean = mean;
      best = agent;
    }
  }
  return best;
}

int cmd_reproduce(const ReproduceArgs& a) {
  std::vector<Task> tasks = a.task == "all" ? all_tasks() : std::vector<Task>{parse_task(a.task)};
  if (a.seeds < 1) throw Error("--seeds must be at least 1");
  EvalReport report;
  const EvalConfig ec{a.episodes, 0, a.workers};
  for (Task t : tasks) {
    EvalReport nlrl = generalization_suite(best_of_seeds(t, AgentKind::nlrl, a).factory(), t, ec);
    append(report, nlrl);
    if (!a.skip_mlp) append(report, generalization_suite(best_of_seeds(t, AgentKind::mlp, a).factory(), t, ec));
    append(report, generalization_suite(random_factory(), t, ec));
  }
  write_report(report, a.out + "/report.csv");
  const std::string table = render_report_table(report);
  std::ofstream(a.out + "/report.txt") << table;
  std::cout << table << "report: " << a.out << "/report.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural logic reinforcement learning: train, evaluate and inspect logic policies"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train an agent and write checkpoint + train_log.csv");
  train->add_option("--config", ta.config, "experiment config file");
  train->add_option("--task", ta.task, "unstack | stack | on | cliff | windy-cliff");
  train->add_option("--variant", ta.variant, "training variant");
  train->add_option("--agent", ta.agent, "nlrl | mlp");
  train->add_option("--seed", ta.seed, "experiment seed");
  train->add_option("--episodes", ta.episodes, "episode cap");
  train->add_option("--lr", ta.lr, "RMSProp learning rate");
  train->add_option("--out", ta.out, "output directory");
  train->add_option("--set", ta.settings, "extra key=value config overrides");
  train->add_option("--workers", ta.workers, "rollout workers (default $NLRL_WORKERS or 1)");
  train->add_flag("--quiet", ta.quiet, "no progress lines");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and write report.csv");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint file");
  eval->add_option("--task", ea.task, "task (required for --agent random)");
  eval->add_option("--agent", ea.agent, "'random' to evaluate the uniform baseline");
  eval->add_option("--variant", ea.variant, "variant to evaluate");
  eval->add_flag("--suite", ea.suite, "evaluate training + every generalization variant");
  eval->add_option("--episodes", ea.episodes, "episodes per variant");
  eval->add_option("--seed", ea.seed, "evaluation seed");
  eval->add_option("--out", ea.out, "report CSV path");
  eval->add_option("--workers", ea.workers, "rollout workers (default $NLRL_WORKERS or 1)");

  std::string rules_ck, rules_out;
  double threshold = kDefaultRuleThreshold;
  auto* rules = app.add_subcommand("rules", "print clauses whose weight exceeds the threshold");
  rules->add_option("--checkpoint", rules_ck, "NLRL checkpoint")->required();
  rules->add_option("--threshold", threshold, "minimum weight");
  rules->add_option("--out", rules_out, "also write the listing here (e.g. rules.txt)");

  std::string oracle_task, oracle_variant = "training";
  bool oracle_all = false;
  auto* oracle = app.add_subcommand("oracle", "optimal return by value iteration");
  oracle->add_option("--task", oracle_task, "task")->required();
  oracle->add_option("--variant", oracle_variant, "variant");
  oracle->add_flag("--all", oracle_all, "every variant of the task");

  ReproduceArgs ra;
  auto* reproduce = app.add_subcommand("reproduce", "train, evaluate and tabulate every agent on every variant");
  reproduce->add_option("--task", ra.task, "a task or 'all'");
  reproduce->add_option("--seeds", ra.seeds, "training seeds per agent (best is reported)");
  reproduce->add_option("--out", ra.out, "output directory (existing checkpoints are reused)");
  reproduce->add_option("--episodes", ra.episodes, "evaluation episodes per row");
  reproduce->add_option("--train-episodes", ra.train_episodes, "training episode cap");
  reproduce->add_option("--workers", ra.workers, "rollout workers (default $NLRL_WORKERS or 1)");
  reproduce->add_flag("--skip-mlp", ra.skip_mlp, "omit the MLP baseline");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*rules) return cmd_rules(rules_ck, threshold, rules_out);
    if (*oracle) return cmd_oracle(oracle_task, oracle_variant, oracle_all);
    if (*reproduce) return cmd_reproduce(ra);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
