#include "builderbench/bench.h"

#include <chrono>
#include <sstream>
#include <thread>

#include "builderbench/env.h"
#include "builderbench/protocols.h"
#include "builderbench/thread_pool.h"

#ifndef BUILDERBENCH_BUILD_TYPE
#define BUILDERBENCH_BUILD_TYPE "unknown"
#endif

namespace builderbench {

MachineInfo CurrentMachine() {
  MachineInfo m;
  m.hardware_threads = static_cast<int>(std::thread::hardware_concurrency());
  m.build_type = BUILDERBENCH_BUILD_TYPE;
#if defined(__clang__)
  m.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  m.compiler = "gcc " __VERSION__;
#else
  m.compiler = "unknown";
#endif
  return m;
}

BenchPoint BenchThroughput(int n, int num_envs, int threads, double duration_s, uint64_t seed,
                           const PhysicsParams& physics) {
  EnvConfig cfg;
  cfg.protocol = Protocol::kSelfSupervised;
  cfg.n = n;
  cfg.physics = physics;
  std::vector<Env> envs(num_envs, Env(cfg));
  std::vector<uint64_t> episodes(num_envs, 0);
  for (int e = 0; e < num_envs; ++e) envs[e].Reset(EpisodeSeed(seed, e, episodes[e]++));
  ThreadPool pool(threads);
  RandomPolicy policy;
  policy.Reset(seed);
  std::vector<Action> actions(num_envs);
  const Observation none;

  BenchPoint p;
  p.n = n;
  p.num_envs = num_envs;
  p.threads = pool.size();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  double elapsed = 0.0;
  while (elapsed < duration_s || p.steps == 0) {
    for (Action& a : actions) a = policy.Act(none, {});
    pool.ParallelFor(envs.size(), [&](size_t i) {
      if (envs[i].t() >= envs[i].horizon()) envs[i].Reset(EpisodeSeed(seed, i, episodes[i]++));
      envs[i].Step(actions[i]);
    });
    p.steps += num_envs;
    elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  }
  p.seconds = elapsed;
  p.steps_per_sec = static_cast<double>(p.steps) / elapsed;
  return p;
}

BenchReport RunBench(const std::vector<int>& ns, int num_envs, int threads, double duration_s,
                     bool thread_scaling, uint64_t seed) {
  BenchReport r;
  r.machine = CurrentMachine();
  for (int n : ns) r.per_n.push_back(BenchThroughput(n, num_envs, threads, duration_s, seed));
  if (thread_scaling && !ns.empty()) {
    for (int t = 1; t <= threads; t *= 2) {
      r.scaling.push_back(BenchThroughput(ns.front(), num_envs, t, duration_s, seed));
    }
  }
  return r;
}

std::string BenchReport::Serialize() const {
  std::ostringstream os;
  os << "machine hardware_threads=" << machine.hardware_threads
     << " build_type=" << machine.build_type << " compiler=\"" << machine.compiler << "\"\n";
  auto line = [&os](const char* kind, const BenchPoint& p) {
    os << kind << " n=" << p.n << " num_envs=" << p.num_envs << " threads=" << p.threads
       << " steps=" << p.steps << " seconds=" << p.seconds
       << " steps_per_sec=" << static_cast<long long>(p.steps_per_sec) << "\n";
  };
  for (const BenchPoint& p : per_n) line("per_n", p);
  for (const BenchPoint& p : scaling) line("scaling", p);
  return os.str();
}

}  // namespace builderbench
