#pragma once

// Train/load/evaluate orchestration over ExperimentConfig: what the CLI
// commands do, minus argument parsing.

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>

#include "nlrl/config.hpp"
#include "nlrl/eval.hpp"
#include "nlrl/oracle.hpp"
#include "nlrl/training.hpp"

namespace nlrl {

struct TrainedAgent {
  AgentKind kind = AgentKind::nlrl;
  Task task = Task::unstack;
  std::shared_ptr<NlrlModel> nlrl;
  std::shared_ptr<Mlp> mlp;

  AgentFactory factory() const {
    switch (kind) {
      case AgentKind::nlrl: return nlrl_factory(nlrl);
      case AgentKind::mlp: return mlp_factory(mlp);
      case AgentKind::random: return random_factory();
    }
    return random_factory();
  }

  void save(const std::string& path) const {
    if (kind == AgentKind::nlrl) save_nlrl_checkpoint(*nlrl, path);
    else if (kind == AgentKind::mlp) save_mlp_checkpoint(*mlp, task, path);
    else throw Error("the random agent has no checkpoint");
  }
};

// Dispatches on the header line.
inline TrainedAgent load_trained_agent(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::string header;
  std::getline(in, header);
  in.close();
  TrainedAgent a;
  if (header == "nlrl-checkpoint v1") {
    a.kind = AgentKind::nlrl;
    a.nlrl = std::make_shared<NlrlModel>(load_nlrl_checkpoint(path));
    a.task = a.nlrl->task;
  } else if (header == "nlrl-mlp-agent v1") {
    auto [task, net] = load_mlp_checkpoint(path);
    a.kind = AgentKind::mlp;
    a.task = task;
    a.mlp = std::make_shared<Mlp>(std::move(net));
  } else {
    throw Error("'" + path + "' is not a recognised checkpoint");
  }
  return a;
}

inline TrainedAgent initial_agent(const ExperimentConfig& cfg, const TaskSpec& spec) {
  std::mt19937_64 init(derive_seed(cfg.train.seed, "init"));
  TrainedAgent a;
  a.kind = cfg.agent;
  a.task = cfg.task;
  if (cfg.agent == AgentKind::nlrl)
    a.nlrl = std::make_shared<NlrlModel>(
        NlrlModel::create(spec, cfg.sketch_or_default(), cfg.steps, init, cfg.init_stddev));
  else if (cfg.agent == AgentKind::mlp)
    a.mlp = std::make_shared<Mlp>(make_policy_mlp(cfg.task, init));
  else
    throw Error("the random agent cannot be trained");
  return a;
}

struct TrainOutcome {
  TrainedAgent agent;
  TrainResult result;
  std::string checkpoint;
  std::string log;
};

inline std::string checkpoint_path(const std::string& out_dir) { return out_dir + "/checkpoint.txt"; }

// Trains per `cfg`, writing `<out>/checkpoint.txt` and `<out>/train_log.csv`.
inline TrainOutcome run_training(const ExperimentConfig& cfg, const std::function<void(const TrainLogRow&)>& on_row = {}) {
  const TaskSpec spec = make_variant(cfg.task, cfg.variant);
  TrainOutcome o;
  o.agent = initial_agent(cfg, spec);
  std::unique_ptr<Agent> agent = o.agent.factory()(spec);
  std::mt19937_64 vinit(derive_seed(cfg.train.seed, "value"));
  Mlp value = make_value_net(cfg.task, vinit);

  TrainConfig tc = cfg.train;
  if (cfg.early_stop && !tc.target) tc.target = cached_optimal_return(cfg.task, cfg.variant);

  std::filesystem::create_directories(cfg.out);
  o.log = cfg.out + "/train_log.csv";
  std::ofstream log(o.log);
  if (!log) throw Error("cannot write '" + o.log + "'");
  write_train_log_header(log);
  o.result = train(*agent, value, spec, tc, [&](const TrainLogRow& r) {
    write_train_log_row(log, r);
    if (on_row) on_row(r);
  });
  o.checkpoint = checkpoint_path(cfg.out);
  o.agent.save(o.checkpoint);
  return o;
}

// Reuses `<out>/checkpoint.txt` when present.
inline TrainedAgent train_or_resume(const ExperimentConfig& cfg, bool* resumed = nullptr,
                                    const std::function<void(const TrainLogRow&)>& on_row = {}) {
  const std::string path = checkpoint_path(cfg.out);
  if (std::filesystem::exists(path)) {
    if (resumed) *resumed = true;
    return load_trained_agent(path);
  }
  if (resumed) *resumed = false;
  return run_training(cfg, on_row).agent;
}

}  // namespace nlrl
