#ifndef BUILDERBENCH_PROTOCOLS_H_
#define BUILDERBENCH_PROTOCOLS_H_

#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "builderbench/env.h"
#include "builderbench/tasks.h"

namespace builderbench {

// A goal-conditioned controller. `goal` holds the flattened target
// positions (3k values).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void Reset(uint64_t seed) { (void)seed; }
  virtual Action Act(const Observation& obs, std::span<const double> goal) = 0;
};

// Uniform actions in [-1, 1]^5 from its own seeded generator.
class RandomPolicy : public Policy {
 public:
  void Reset(uint64_t seed) override { rng_.seed(seed); }
  Action Act(const Observation& obs, std::span<const double> goal) override;

 private:
  std::mt19937_64 rng_;
};

// Holds still with the fingers open.
class IdlePolicy : public Policy {
 public:
  Action Act(const Observation&, std::span<const double>) override { return {0, 0, 0, 0, 1}; }
};

// Archive of visited cube configurations with grid visitation counts.
class GoalBuffer {
 public:
  explicit GoalBuffer(size_t capacity = 100000, double cell_size = 0.02);

  // Inserts the cube positions of `world` (3n values).
  void RecordVisit(const WorldState& world);
  void Insert(std::vector<double> config);

  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  double cell_size() const { return cell_size_; }
  bool empty() const { return entries_.empty(); }

  // Oldest first.
  const std::vector<double>& entry(size_t i) const { return entries_[i]; }

  // Visits recorded in the grid cell containing `config`.
  int CellCount(std::span<const double> config) const;

  // Sum of all cell counts; equals size().
  long long TotalCount() const;

 private:
  std::vector<int> Cell(std::span<const double> config) const;

  size_t capacity_;
  double cell_size_;
  std::deque<std::vector<double>> entries_;
  std::map<std::vector<int>, int> grid_;
};

// Draws `candidates` entries uniformly (with replacement) and returns the
// one in the least-visited cell, ties broken uniformly. Throws EmptyBuffer.
std::vector<double> MegaSample(const GoalBuffer& buffer, std::mt19937_64& rng,
                               int candidates = 128);

struct GoalStats {
  std::vector<double> goal;
  int attempts = 0;
  int successes = 0;
};

// p (1 - p) with p = successes / attempts. Throws NoAttempts.
double SflScore(const GoalStats& stats);

inline constexpr double kSflUnattemptedScore = 0.25;

// Indices into `pool` of m selected goals. Each slot, with probability
// 1 - epsilon, takes the next goal in descending score order (stable);
// otherwise a uniform draw. Unattempted goals score 0.25. Throws EmptyBuffer
// for an empty pool.
std::vector<size_t> SflSelect(std::span<const GoalStats> pool, int m, double epsilon,
                              std::mt19937_64& rng);

struct TaskEval {
  std::string task;
  int episodes = 0;
  double success_rate = 0.0;
  double normalized_return = 0.0;
};

struct EvalReport {
  std::vector<TaskEval> tasks;
  double mean_success_rate = 0.0;
  double mean_normalized_return = 0.0;

  // One line per task, then a "mean" line; fields are key=value.
  std::string Serialize() const;
};

struct EvalOptions {
  Protocol protocol = Protocol::kSupervised;
  RewardConfig reward;
  PhysicsParams physics;
};

// Runs `episodes_per_task` full-horizon episodes per task in an env with
// n = task.n. Success is read at t = H; the normalized return is the summed
// dense reward divided by H k, clipped to [0, 1].
EvalReport Evaluate(Policy& policy, std::span<const TaskSpec> tasks, int episodes_per_task,
                    uint64_t seed, const EvalOptions& options = {});

// Seed of episode `episode` of task `task` for a run seeded with `seed`.
uint64_t EpisodeSeed(uint64_t seed, uint64_t task, uint64_t episode);

}  // namespace builderbench

#endif  // BUILDERBENCH_PROTOCOLS_H_
