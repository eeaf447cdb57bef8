#include "builderbench/protocols.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace builderbench {
namespace {

double Uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

size_t UniformIndex(std::mt19937_64& rng, size_t n) {
  return static_cast<size_t>(Uniform01(rng) * static_cast<double>(n));
}

uint64_t SplitMix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Action RandomPolicy::Act(const Observation&, std::span<const double>) {
  Action a;
  for (double& v : a) v = 2.0 * Uniform01(rng_) - 1.0;
  return a;
}

GoalBuffer::GoalBuffer(size_t capacity, double cell_size)
    : capacity_(std::max<size_t>(capacity, 1)), cell_size_(cell_size) {}

std::vector<int> GoalBuffer::Cell(std::span<const double> config) const {
  std::vector<int> cell(config.size());
  for (size_t i = 0; i < config.size(); ++i) {
    cell[i] = static_cast<int>(std::floor(config[i] / cell_size_));
  }
  return cell;
}

void GoalBuffer::RecordVisit(const WorldState& world) {
  std::vector<double> config;
  config.reserve(3 * world.cubes.size());
  for (const RigidBody& c : world.cubes) {
    config.push_back(c.position.x());
    config.push_back(c.position.y());
    config.push_back(c.position.z());
  }
  Insert(std::move(config));
}

void GoalBuffer::Insert(std::vector<double> config) {
  if (entries_.size() == capacity_) {
    auto it = grid_.find(Cell(entries_.front()));
    if (--it->second == 0) grid_.erase(it);
    entries_.pop_front();
  }
  ++grid_[Cell(config)];
  entries_.push_back(std::move(config));
}

int GoalBuffer::CellCount(std::span<const double> config) const {
  auto it = grid_.find(Cell(config));
  return it == grid_.end() ? 0 : it->second;
}

long long GoalBuffer::TotalCount() const {
  long long total = 0;
  for (const auto& [cell, count] : grid_) total += count;
  return total;
}

std::vector<double> MegaSample(const GoalBuffer& buffer, std::mt19937_64& rng, int candidates) {
  if (buffer.empty()) throw EmptyBuffer("goal buffer is empty");
  std::vector<size_t> best;
  int best_count = std::numeric_limits<int>::max();
  for (int c = 0; c < std::max(candidates, 1); ++c) {
    const size_t i = UniformIndex(rng, buffer.size());
    const int count = buffer.CellCount(buffer.entry(i));
    if (count < best_count) {
      best_count = count;
      best.assign(1, i);
    } else if (count == best_count) {
      best.push_back(i);
    }
  }
  return buffer.entry(best[UniformIndex(rng, best.size())]);
}

double SflScore(const GoalStats& stats) {
  if (stats.attempts < 1) throw NoAttempts("goal has no attempts");
  const double p = static_cast<double>(stats.successes) / stats.attempts;
  return p * (1.0 - p);
}

std::vector<size_t> SflSelect(std::span<const GoalStats> pool, int m, double epsilon,
                              std::mt19937_64& rng) {
  if (pool.empty()) throw EmptyBuffer("goal pool is empty");
  std::vector<double> score(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) {
    score[i] = pool[i].attempts == 0 ? kSflUnattemptedScore : SflScore(pool[i]);
  }
  std::vector<size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return score[a] > score[b]; });
  std::vector<size_t> out;
  size_t next = 0;
  for (int s = 0; s < m; ++s) {
    if (Uniform01(rng) < epsilon) {
      out.push_back(UniformIndex(rng, pool.size()));
    } else {
      out.push_back(order[next % order.size()]);
      ++next;
    }
  }
  return out;
}

std::string EvalReport::Serialize() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  for (const TaskEval& t : tasks) {
    os << "task=" << t.task << " episodes=" << t.episodes << " success_rate=" << t.success_rate
       << " normalized_return=" << t.normalized_return << "\n";
  }
  os << "task=mean tasks=" << tasks.size() << " success_rate=" << mean_success_rate
     << " normalized_return=" << mean_normalized_return << "\n";
  return os.str();
}

uint64_t EpisodeSeed(uint64_t seed, uint64_t task, uint64_t episode) {
  return SplitMix(SplitMix(SplitMix(seed) ^ task) ^ episode);
}

EvalReport Evaluate(Policy& policy, std::span<const TaskSpec> tasks, int episodes_per_task,
                    uint64_t seed, const EvalOptions& options) {
  EvalReport report;
  for (size_t ti = 0; ti < tasks.size(); ++ti) {
    const TaskSpec& task = tasks[ti];
    EnvConfig cfg;
    cfg.protocol = options.protocol;
    cfg.n = task.n;
    cfg.reward = options.reward;
    cfg.physics = options.physics;
    Env env(cfg);
    const std::vector<double> goal = FlattenTargets(task.target_positions);
    TaskEval te;
    te.task = task.name;
    te.episodes = episodes_per_task;
    for (int e = 0; e < episodes_per_task; ++e) {
      const uint64_t s = EpisodeSeed(seed, ti, e);
      Observation obs = env.Reset(s, &task);
      policy.Reset(s);
      double dense_sum = 0.0;
      bool success = false;
      for (;;) {
        StepResult r = env.Step(policy.Act(obs, goal));
        dense_sum += DenseFromDistances(r.info.distances);
        obs = std::move(r.observation);
        if (r.done) {
          success = r.info.success;
          break;
        }
      }
      const double norm = dense_sum / (static_cast<double>(env.horizon()) * task.k());
      te.success_rate += success ? 1.0 : 0.0;
      te.normalized_return += std::clamp(norm, 0.0, 1.0);
    }
    if (episodes_per_task > 0) {
      te.success_rate /= episodes_per_task;
      te.normalized_return /= episodes_per_task;
    }
    report.tasks.push_back(te);
    report.mean_success_rate += te.success_rate;
    report.mean_normalized_return += te.normalized_return;
  }
  if (!tasks.empty()) {
    report.mean_success_rate /= static_cast<double>(tasks.size());
    report.mean_normalized_return /= static_cast<double>(tasks.size());
  }
  return report;
}

}  // namespace builderbench
