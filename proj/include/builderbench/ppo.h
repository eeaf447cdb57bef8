#ifndef BUILDERBENCH_PPO_H_
#define BUILDERBENCH_PPO_H_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "builderbench/env.h"
#include "builderbench/protocols.h"

namespace builderbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense tanh network; the output layer is linear. Activations are column
// batches: input is (in_dim x B).
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in_dim, const std::vector<int>& hidden, int out_dim, std::mt19937_64& rng,
      double out_scale);

  struct Cache {
    std::vector<Matrix> activations;  // input, then each hidden layer output
  };

  Matrix Forward(const Matrix& x, Cache* cache = nullptr) const;

  // Accumulates parameter gradients for d(loss)/d(output) = `grad_out` into
  // `grad` (same layout as Flatten()).
  void Backward(const Cache& cache, const Matrix& grad_out, Vector& grad) const;

  int NumParams() const;
  void Flatten(Vector& out, int offset) const;
  void Unflatten(const Vector& in, int offset);

  int in_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_[0].cols()); }

 private:
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

// Running mean and variance (parallel Welford merge).
struct RunningNorm {
  Vector mean;
  Vector var;
  double count = 1e-4;

  void Init(int dim);
  void Update(const Matrix& batch);  // dim x B
  Matrix Apply(const Matrix& batch) const;
};

// Tanh-squashed diagonal Gaussian policy and a separate value network.
// Actions are a = tanh(u) with u ~ N(mean(x), exp(log_std)^2).
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int input_dim, const std::vector<int>& hidden, uint64_t seed);

  int input_dim() const { return input_dim_; }
  int NumParams() const;
  Vector Params() const;
  void SetParams(const Vector& p);

  Matrix Mean(const Matrix& x) const { return actor_.Forward(x); }
  Vector Value(const Matrix& x) const;

  Mlp actor_;
  Mlp critic_;
  Vector log_std_;

 private:
  int input_dim_ = 0;
};

inline constexpr int kActionDim = 5;

double GaussianLogProb(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& mean,
                       const Eigen::Ref<const Vector>& log_std);

// Advantages and returns for one trajectory. `values` carries one extra
// bootstrap entry. dones[t] cuts the recursion after step t. Throws
// ShapeMismatch.
struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};
GaeResult Gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const char> dones, double gamma, double lambda);

struct PpoHyper {
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatches = 4;
  double lr = 3e-4;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
};

// Flat training batch; columns are samples.
struct PpoBatch {
  Matrix inputs;        // normalized policy inputs, input_dim x N
  Matrix pre_squash;    // u, 5 x N
  Vector log_probs;     // of u under the behaviour policy
  Vector advantages;
  Vector returns;
  int size() const { return static_cast<int>(inputs.cols()); }
};

struct PpoLossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Loss on a minibatch (advantages normalized inside) and, when `grad` is
// non-null, its gradient with respect to ActorCritic::Params().
PpoLossTerms PpoLoss(const ActorCritic& model, const PpoBatch& batch, const PpoHyper& hyper,
                     Vector* grad);

class Adam {
 public:
  explicit Adam(int dim = 0) : m_(Vector::Zero(dim)), v_(Vector::Zero(dim)) {}
  void Step(Vector& params, const Vector& grad, double lr);
  int steps() const { return t_; }

  Vector m_, v_;
  int t_ = 0;
};

struct PpoMetrics {
  PpoLossTerms last;
  double mean_approx_kl = 0.0;
  double mean_clip_fraction = 0.0;
  int minibatch_steps = 0;
};

// Clipped-surrogate update over `epochs` passes of shuffled minibatches.
// On a non-finite loss or gradient the model and optimizer are restored
// and NonFiniteLoss is thrown.
PpoMetrics PpoUpdate(ActorCritic& model, Adam& adam, const PpoBatch& batch,
                     const PpoHyper& hyper, std::mt19937_64& rng);

enum class GoalMode { kTask, kUniform, kMega, kSfl };
std::string ToString(GoalMode m);
GoalMode ParseGoalMode(const std::string& s);

struct TrainConfig {
  std::string task = "generated/tower_1";
  Protocol protocol = Protocol::kSupervised;
  RewardConfig reward;
  PhysicsParams physics;
  GoalMode goal_mode = GoalMode::kTask;
  std::vector<int> hidden = {256, 256};
  int num_envs = 512;
  int rollout_steps = 64;
  int total_updates = 100;
  int eval_every = 10;
  int eval_episodes = 10;
  std::vector<std::string> eval_tasks;  // empty: the training task
  double gamma = 0.99;
  double lambda = 0.95;
  double init_log_std = 0.0;
  PpoHyper ppo;
  bool normalize_obs = true;
  uint64_t seed = 0;
  int threads = 1;
  // Self-supervised goal sampling.
  size_t goal_buffer_capacity = 100000;
  int mega_candidates = 128;
  double sfl_epsilon = 0.1;
  int sfl_pool = 64;

  // Canonical text of every field that shapes the network or its inputs.
  std::string Canonical() const;
  uint64_t Hash() const { return Fnv1a(Canonical()); }
};

struct CurvePoint {
  int update = 0;
  long long env_steps = 0;
  EvalReport report;
};

// Deterministic (mean-action) policy backed by a trained model.
class PpoPolicy : public Policy {
 public:
  PpoPolicy(const ActorCritic& model, const RunningNorm& norm, bool normalize)
      : model_(model), norm_(norm), normalize_(normalize) {}
  Action Act(const Observation& obs, std::span<const double> goal) override;

 private:
  const ActorCritic& model_;
  const RunningNorm& norm_;
  bool normalize_;
};

struct TrainResult {
  ActorCritic model;
  RunningNorm norm;
  std::vector<CurvePoint> curve;  // total_updates / eval_every + 1 points
  long long env_steps = 0;
};

using TrainLogger = std::function<void(const CurvePoint&)>;

TrainResult Train(const TrainConfig& config, const TrainLogger& log = nullptr);

// Versioned binary checkpoint with the config hash. Loading with a config of
// a different hash throws HashMismatch.
void SaveCheckpoint(const std::string& path, const TrainConfig& config, const ActorCritic& model,
                    const RunningNorm& norm);
void LoadCheckpoint(const std::string& path, const TrainConfig& config, ActorCritic& model,
                    RunningNorm& norm);

// Policy input width for a config: observation plus flattened goal.
int PolicyInputDim(int n, int k);

}  // namespace builderbench

#endif  // BUILDERBENCH_PPO_H_
