// bb: command-line front end for the BuilderBench engine.
//
// Every flag has a config-file twin of the same name. Values resolve as
// flag, then config file, then built-in default.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "builderbench/bench.h"
#include "builderbench/config.h"
#include "builderbench/ppo.h"
#include "builderbench/protocols.h"
#include "builderbench/scripted.h"
#include "builderbench/tasks.h"
#include "builderbench/teleop.h"
#include "builderbench/trajectory.h"

namespace bb = builderbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitConfig = 4;

std::atomic<bool> g_stop{false};

void HandleSignal(int) { g_stop.store(true); }

// Flags registered as optional strings so they can be layered over the
// config file before any typed parsing happens.
class Settings {
 public:
  void Add(CLI::App* app, const std::string& key, const std::string& help) {
    app->add_option("--" + key, flags_[key], help);
  }
  void AddFlag(CLI::App* app, const std::string& key, const std::string& help) {
    app->add_flag("--" + key, bool_flags_[key], help);
  }

  bb::RunConfig Resolve() const {
    bb::RunConfig cfg = config_path_ ? bb::RunConfig::Load(*config_path_) : bb::RunConfig{};
    for (const auto& [k, v] : flags_) {
      if (v) cfg.Set(k, *v);
    }
    for (const auto& [k, v] : bool_flags_) {
      if (v) cfg.Set(k, "true");
    }
    return cfg;
  }

  std::optional<std::string>& config_path() { return config_path_; }
  std::optional<int>& threads() { return threads_; }

 private:
  std::optional<std::string> config_path_;
  std::optional<int> threads_;
  std::map<std::string, std::optional<std::string>> flags_;
  std::map<std::string, bool> bool_flags_;
};

bool GetBool(const bb::RunConfig& cfg, const std::string& key, bool fallback) {
  const auto v = cfg.Get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw bb::ConfigError("key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> IntList(const bb::RunConfig& cfg, const std::string& key,
                         const std::vector<int>& fallback) {
  const auto v = cfg.Get(key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const std::string& item : SplitList(*v)) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw bb::ConfigError("key '" + key + "': '" + item + "' is not an integer");
    }
  }
  return out;
}

uint64_t GetSeed(const bb::RunConfig& cfg) {
  const int seed = cfg.GetInt("seed", 0);
  if (seed < 0) throw bb::ConfigError("key 'seed': must be non-negative");
  return static_cast<uint64_t>(seed);
}

void AddPhysicsKeys(CLI::App* app, Settings& s) {
  s.Add(app, "friction_mu", "Coulomb friction coefficient");
  s.Add(app, "solver_iterations", "Contact solver iterations per substep");
  s.Add(app, "substeps_per_control", "Physics substeps per control step");
  s.Add(app, "substep_dt", "Physics substep in seconds");
}

bb::PhysicsParams Physics(const bb::RunConfig& cfg) {
  bb::PhysicsParams p;
  p.friction_mu = cfg.GetDouble("friction_mu", p.friction_mu);
  p.solver_iterations = cfg.GetInt("solver_iterations", p.solver_iterations);
  p.substeps_per_control = cfg.GetInt("substeps_per_control", p.substeps_per_control);
  p.substep_dt = cfg.GetDouble("substep_dt", p.substep_dt);
  return p;
}

void AddRewardKeys(CLI::App* app, Settings& s) {
  s.Add(app, "reward", "dense or sparse");
  s.Add(app, "matching", "invariant or sensitive");
  s.Add(app, "protocol", "supervised or self_supervised");
}

bb::RewardConfig Reward(const bb::RunConfig& cfg) {
  bb::RewardConfig r;
  r.shape = bb::ParseRewardShape(cfg.GetString("reward", bb::ToString(r.shape)));
  r.matching = bb::ParseMatching(cfg.GetString("matching", bb::ToString(r.matching)));
  return r;
}

std::vector<bb::TaskSpec> LoadTaskSet(const bb::RunConfig& cfg, const std::string& key,
                                      const std::string& fallback) {
  const std::vector<bb::TaskSpec>* pool = &bb::BuiltinRegistry();
  bb::TaskFile file;
  if (const auto path = cfg.Get("tasks_file")) {
    file = bb::LoadTasks(*path);
    pool = &file.tasks;
  }
  const std::string names = cfg.GetString(key, fallback);
  if (names.empty() || names == "all") return *pool;
  std::vector<bb::TaskSpec> out;
  for (const std::string& name : SplitList(names)) {
    const bb::TaskSpec* t = bb::FindTask(*pool, name);
    if (!t) throw bb::ConfigError("unknown task '" + name + "'");
    out.push_back(*t);
  }
  return out;
}

void AddTrainKeys(CLI::App* app, Settings& s) {
  s.Add(app, "task", "Training task name");
  s.Add(app, "goal_mode", "task, uniform, mega or sfl");
  s.Add(app, "hidden", "Comma-separated hidden layer widths");
  s.Add(app, "num_envs", "Parallel environments");
  s.Add(app, "rollout_steps", "Steps per env per update");
  s.Add(app, "total_updates", "PPO updates");
  s.Add(app, "eval_every", "Updates between evaluations");
  s.Add(app, "eval_episodes", "Episodes per evaluation task");
  s.Add(app, "eval_tasks", "Comma-separated evaluation tasks");
  s.Add(app, "gamma", "Discount");
  s.Add(app, "lambda", "GAE lambda");
  s.Add(app, "lr", "Adam learning rate");
  s.Add(app, "clip", "PPO clip range");
  s.Add(app, "epochs", "Epochs per update");
  s.Add(app, "minibatches", "Minibatches per epoch");
  s.Add(app, "entropy_coef", "Entropy bonus");
  s.Add(app, "init_log_std", "Initial policy log standard deviation");
  s.Add(app, "normalize_obs", "Running observation normalization (true/false)");
  s.Add(app, "seed", "Run seed");
  AddPhysicsKeys(app, s);
  AddRewardKeys(app, s);
}

bb::TrainConfig TrainSettings(const bb::RunConfig& cfg, int threads) {
  bb::TrainConfig c;
  c.task = cfg.GetString("task", c.task);
  c.protocol = bb::ParseProtocol(cfg.GetString("protocol", bb::ToString(c.protocol)));
  c.reward = Reward(cfg);
  c.physics = Physics(cfg);
  c.goal_mode = bb::ParseGoalMode(cfg.GetString("goal_mode", bb::ToString(c.goal_mode)));
  c.hidden = IntList(cfg, "hidden", c.hidden);
  c.num_envs = cfg.GetInt("num_envs", c.num_envs);
  c.rollout_steps = cfg.GetInt("rollout_steps", c.rollout_steps);
  c.total_updates = cfg.GetInt("total_updates", c.total_updates);
  c.eval_every = cfg.GetInt("eval_every", c.eval_every);
  c.eval_episodes = cfg.GetInt("eval_episodes", c.eval_episodes);
  if (const auto v = cfg.Get("eval_tasks")) c.eval_tasks = SplitList(*v);
  c.gamma = cfg.GetDouble("gamma", c.gamma);
  c.lambda = cfg.GetDouble("lambda", c.lambda);
  c.ppo.lr = cfg.GetDouble("lr", c.ppo.lr);
  c.ppo.clip_eps = cfg.GetDouble("clip", c.ppo.clip_eps);
  c.ppo.epochs = cfg.GetInt("epochs", c.ppo.epochs);
  c.ppo.minibatches = cfg.GetInt("minibatches", c.ppo.minibatches);
  c.ppo.entropy_coef = cfg.GetDouble("entropy_coef", c.ppo.entropy_coef);
  c.init_log_std = cfg.GetDouble("init_log_std", c.init_log_std);
  c.normalize_obs = GetBool(cfg, "normalize_obs", c.normalize_obs);
  c.seed = GetSeed(cfg);
  c.threads = threads;
  return c;
}

std::ostream* OpenOutput(const bb::RunConfig& cfg, std::ofstream& file) {
  const auto path = cfg.Get("output");
  if (!path) return &std::cout;
  file.open(*path);
  if (!file) throw bb::ConfigError("cannot write '" + *path + "'");
  return &file;
}

// --- subcommands -----------------------------------------------------------

int CmdRun(const bb::RunConfig& cfg, int threads) {
  const bb::TrainConfig tc = TrainSettings(cfg, threads);
  std::ofstream file;
  std::ostream& out = *OpenOutput(cfg, file);
  const bb::TrainResult result = bb::Train(tc, [&](const bb::CurvePoint& p) {
    out << "update=" << p.update << " env_steps=" << p.env_steps
        << " success_rate=" << p.report.mean_success_rate
        << " normalized_return=" << p.report.mean_normalized_return << "\n";
    out.flush();
  });
  if (const auto path = cfg.Get("checkpoint")) {
    bb::SaveCheckpoint(*path, tc, result.model, result.norm);
    std::cerr << "checkpoint written to " << *path << "\n";
  }
  return kExitOk;
}

std::unique_ptr<bb::Policy> MakePolicy(const std::string& kind) {
  if (kind == "random") return std::make_unique<bb::RandomPolicy>();
  if (kind == "idle") return std::make_unique<bb::IdlePolicy>();
  if (kind == "scripted") return std::make_unique<bb::ScriptedPolicy>(false);
  if (kind == "scripted_hold") return std::make_unique<bb::ScriptedPolicy>(true);
  throw bb::ConfigError("unknown policy '" + kind + "'");
}

int CmdEval(const bb::RunConfig& cfg, int threads) {
  const std::vector<bb::TaskSpec> tasks = LoadTaskSet(cfg, "tasks", "cube-1-task1");
  bb::EvalOptions opts;
  opts.protocol = bb::ParseProtocol(cfg.GetString("protocol", "supervised"));
  opts.reward = Reward(cfg);
  opts.physics = Physics(cfg);
  const int episodes = cfg.GetInt("episodes", 10);
  const uint64_t seed = GetSeed(cfg);

  std::unique_ptr<bb::Policy> policy;
  bb::TrainConfig tc;
  std::optional<bb::ActorCritic> model;
  bb::RunningNorm norm;
  if (const auto ckpt = cfg.Get("checkpoint")) {
    tc = TrainSettings(cfg, threads);
    const bb::TaskSpec* train_task = bb::FindTask(bb::BuiltinRegistry(), tc.task);
    if (!train_task) throw bb::ConfigError("unknown task '" + tc.task + "'");
    model.emplace(bb::PolicyInputDim(train_task->n, train_task->k()), tc.hidden, tc.seed);
    bb::LoadCheckpoint(*ckpt, tc, *model, norm);
    policy = std::make_unique<bb::PpoPolicy>(*model, norm, tc.normalize_obs);
  } else {
    policy = MakePolicy(cfg.GetString("policy", "random"));
  }
  std::ofstream file;
  *OpenOutput(cfg, file) << bb::Evaluate(*policy, tasks, episodes, seed, opts).Serialize();
  return kExitOk;
}

int CmdTeleop(const bb::RunConfig& cfg) {
  bb::TeleopOptions opts;
  opts.host = cfg.GetString("host", opts.host);
  opts.port = cfg.GetInt("port", opts.port);
  opts.tick_ms = cfg.GetInt("tick_ms", opts.tick_ms);
  opts.default_task = cfg.GetString("task", opts.default_task);
  opts.record_dir = cfg.GetString("record_dir", opts.record_dir);
  opts.static_dir = cfg.GetString("static_dir", opts.static_dir);
  opts.physics = Physics(cfg);
  opts.reward = Reward(cfg);
  std::signal(SIGINT, HandleSignal);
  std::signal(SIGTERM, HandleSignal);
  std::atomic<int> port{0};
  std::cerr << "teleop: serving on " << opts.host << ":" << opts.port << "\n";
  bb::ServeTeleop(opts, g_stop, &port);
  return kExitOk;
}

std::string VerdictText(const std::optional<bb::StabilityVerdict>& v) {
  return v ? bb::ToString(v->classification) : "-";
}

int CmdValidate(const bb::RunConfig& cfg) {
  const std::vector<bb::TaskSpec> tasks = LoadTaskSet(cfg, "tasks", "all");
  std::ofstream file;
  std::ostream& out = *OpenOutput(cfg, file);
  bool all_ok = true;
  out << std::left;
  for (const bb::TaskSpec& t : tasks) {
    const bb::ValidationReport r = bb::ValidateTask(t);
    all_ok = all_ok && r.ok;
    std::string flags;
    for (const std::string& f : r.flags) flags += (flags.empty() ? "" : ",") + f;
    out << "task=" << t.name << " n=" << t.n << " k=" << t.k()
        << " targets=" << VerdictText(r.target_verdict)
        << " solution=" << VerdictText(r.solution_verdict)
        << " flags=" << (flags.empty() ? "-" : flags) << " verdict=" << (r.ok ? "ok" : "FAIL")
        << "\n";
    for (const std::string& e : r.errors) out << "  error: " << e << "\n";
  }
  if (const auto path = cfg.Get("export")) {
    bb::SaveTasks(*path, bb::TaskFile{bb::kTaskFormatVersion, tasks});
  }
  return all_ok ? kExitOk : kExitValidation;
}

int CmdBench(const bb::RunConfig& cfg, int threads) {
  const std::vector<int> ns = IntList(cfg, "n", {1, 3, 9});
  const int envs = cfg.GetInt("num_envs", 512);
  const double duration = cfg.GetDouble("duration", 5.0);
  const bool scaling = GetBool(cfg, "scaling", true);
  const bb::BenchReport report = bb::RunBench(ns, envs, threads, duration, scaling, GetSeed(cfg));
  std::ofstream file;
  *OpenOutput(cfg, file) << report.Serialize();
  return kExitOk;
}

int CmdRecord(const bb::RunConfig& cfg) {
  const std::string name = cfg.GetString("task", "cube-1-task1");
  const std::vector<bb::TaskSpec> tasks = LoadTaskSet(cfg, "task", name);
  const bb::TaskSpec& task = tasks.front();
  const auto path = cfg.Get("output");
  if (!path) throw bb::ConfigError("record needs --output");
  bb::EnvConfig ec;
  ec.n = task.n;
  ec.physics = Physics(cfg);
  ec.reward = Reward(cfg);
  ec.protocol = bb::ParseProtocol(cfg.GetString("protocol", "supervised"));
  bb::Env env(ec);
  const uint64_t seed = GetSeed(cfg);
  bb::Observation obs = env.Reset(seed, &task);
  auto policy = MakePolicy(cfg.GetString("policy", "random"));
  policy->Reset(seed);
  const int steps = std::min(cfg.GetInt("steps", env.horizon()), env.horizon());
  bb::TrajectoryWriter writer(*path, bb::MakeHeader(env, &task));
  writer.Append(bb::CaptureFrame(env, bb::Action{}, 0.0));
  const std::vector<double> goal = bb::FlattenTargets(env.targets());
  for (int i = 0; i < steps; ++i) {
    const bb::Action a = bb::ClampAction(policy->Act(obs, goal));
    const bb::StepResult r = env.Step(a);
    writer.Append(bb::CaptureFrame(env, a, r.reward));
    obs = r.observation;
  }
  std::cout << "frames=" << writer.frames() << " success=" << (env.Info().success ? 1 : 0)
            << " path=" << *path << "\n";
  return kExitOk;
}

int CmdReplay(const bb::RunConfig& cfg, const std::string& path) {
  const bb::TrajectoryLog log = bb::ReadTrajectory(path);
  const bb::ReplayResult r = bb::Replay(log, Physics(cfg));
  std::cout << "replay ok frames=" << r.frames << " success=" << (r.success ? 1 : 0)
            << " total_reward=" << r.total_reward << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BuilderBench environment engine"};
  app.require_subcommand(1);
  Settings s;
  app.add_option("--config", s.config_path(), "key=value run configuration file");
  app.add_option("--threads", s.threads(), "Worker thread cap (default: BB_THREADS or all cores)");

  CLI::App* run = app.add_subcommand("run", "Train a PPO agent");
  AddTrainKeys(run, s);
  s.Add(run, "checkpoint", "Write the final model here");
  s.Add(run, "output", "Learning-curve file (default: stdout)");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy on tasks");
  AddTrainKeys(eval, s);
  s.Add(eval, "tasks", "Comma-separated task names, or 'all'");
  s.Add(eval, "tasks_file", "Load tasks from this YAML file instead of the builtins");
  s.Add(eval, "episodes", "Episodes per task");
  s.Add(eval, "policy", "random, idle, scripted or scripted_hold");
  s.Add(eval, "checkpoint", "Evaluate this trained model (train keys must match)");
  s.Add(eval, "output", "Report file (default: stdout)");

  CLI::App* teleop = app.add_subcommand("teleop", "Serve the teleoperation session");
  s.Add(teleop, "host", "IPv4 address to bind");
  s.Add(teleop, "port", "TCP port (0 picks a free one)");
  s.Add(teleop, "tick_ms", "Control period in milliseconds");
  s.Add(teleop, "task", "Task loaded at startup");
  s.Add(teleop, "record_dir", "Directory for session recordings");
  s.Add(teleop, "static_dir", "Serve UI files from this directory");
  AddPhysicsKeys(teleop, s);
  AddRewardKeys(teleop, s);

  CLI::App* validate = app.add_subcommand("validate-tasks", "Check task invariants and stability");
  s.Add(validate, "tasks", "Comma-separated task names, or 'all'");
  s.Add(validate, "tasks_file", "Validate tasks from this YAML file");
  s.Add(validate, "export", "Also write the checked tasks to this YAML file");
  s.Add(validate, "output", "Table file (default: stdout)");

  CLI::App* bench = app.add_subcommand("bench", "Measure batched stepping throughput");
  s.Add(bench, "n", "Comma-separated cube counts");
  s.Add(bench, "num_envs", "Environments per batch");
  s.Add(bench, "duration", "Seconds per measurement");
  s.Add(bench, "scaling", "Also measure thread scaling (true/false)");
  s.Add(bench, "seed", "Action seed");
  s.Add(bench, "output", "Report file (default: stdout)");

  CLI::App* record = app.add_subcommand("record", "Record a scripted or random episode");
  s.Add(record, "task", "Task name");
  s.Add(record, "tasks_file", "Load the task from this YAML file");
  s.Add(record, "policy", "random, idle, scripted or scripted_hold");
  s.Add(record, "steps", "Control steps to record (default: the horizon)");
  s.Add(record, "seed", "Reset seed");
  s.Add(record, "output", "Trajectory file");
  AddPhysicsKeys(record, s);
  AddRewardKeys(record, s);

  CLI::App* replay = app.add_subcommand("replay", "Re-execute a trajectory and compare frames");
  std::string replay_path;
  replay->add_option("log", replay_path, "Trajectory file")->required();
  AddPhysicsKeys(replay, s);

  CLI11_PARSE(app, argc, argv);

  try {
    const bb::RunConfig cfg = s.Resolve();
    const int threads = bb::ResolveThreads(s.threads(), cfg);
    if (run->parsed()) return CmdRun(cfg, threads);
    if (eval->parsed()) return CmdEval(cfg, threads);
    if (teleop->parsed()) return CmdTeleop(cfg);
    if (validate->parsed()) return CmdValidate(cfg);
    if (bench->parsed()) return CmdBench(cfg, threads);
    if (record->parsed()) return CmdRecord(cfg);
    if (replay->parsed()) return CmdReplay(cfg, replay_path);
  } catch (const bb::DivergenceAt& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const bb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bb::HashMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bb::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
