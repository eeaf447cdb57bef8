#ifndef BUILDERBENCH_BENCH_H_
#define BUILDERBENCH_BENCH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "builderbench/physics.h"

namespace builderbench {

struct BenchPoint {
  int n = 1;
  int num_envs = 1;
  int threads = 1;
  long long steps = 0;
  double seconds = 0.0;
  double steps_per_sec = 0.0;
};

struct MachineInfo {
  int hardware_threads = 0;
  std::string build_type;
  std::string compiler;
};

MachineInfo CurrentMachine();

// Random-action batched stepping of `num_envs` envs with `n` cubes for
// about `duration_s` seconds. Envs are reset when their episode ends.
BenchPoint BenchThroughput(int n, int num_envs, int threads, double duration_s,
                           uint64_t seed = 0, const PhysicsParams& physics = {});

struct BenchReport {
  MachineInfo machine;
  std::vector<BenchPoint> per_n;      // requested threads, one per n
  std::vector<BenchPoint> scaling;    // first n, threads 1, 2, 4, ... up to requested

  // key=value lines, one per point, after machine metadata lines.
  std::string Serialize() const;
};

BenchReport RunBench(const std::vector<int>& ns, int num_envs, int threads, double duration_s,
                     bool thread_scaling = true, uint64_t seed = 0);

}  // namespace builderbench

#endif  // BUILDERBENCH_BENCH_H_
