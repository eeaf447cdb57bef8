#include "builderbench/ppo.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "builderbench/thread_pool.h"

namespace builderbench {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double Uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller; one draw per call keeps the stream layout simple.
double Normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - Uniform01(rng);  // (0, 1]
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void Shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(Uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[j]);
  }
}

bool AllFinite(const Vector& v) { return v.allFinite(); }

}  // namespace

// --- Mlp -------------------------------------------------------------------

Mlp::Mlp(int in_dim, const std::vector<int>& hidden, int out_dim, std::mt19937_64& rng,
         double out_scale) {
  std::vector<int> dims = {in_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool last = l + 2 == dims.size();
    const double scale = (last ? out_scale : 1.0) / std::sqrt(static_cast<double>(dims[l]));
    Matrix w(dims[l + 1], dims[l]);
    for (int c = 0; c < w.cols(); ++c) {
      for (int r = 0; r < w.rows(); ++r) w(r, c) = scale * Normal(rng);
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(dims[l + 1]));
  }
}

Matrix Mlp::Forward(const Matrix& x, Cache* cache) const {
  if (cache) cache->activations.clear();
  Matrix h = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    if (cache) cache->activations.push_back(h);
    Matrix z = weights_[l] * h;
    z.colwise() += biases_[l];
    h = l + 1 < weights_.size() ? Matrix(z.array().tanh()) : z;
  }
  return h;
}

void Mlp::Backward(const Cache& cache, const Matrix& grad_out, Vector& grad) const {
  // Parameter offsets of each layer.
  std::vector<int> offset(weights_.size());
  int off = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    offset[l] = off;
    off += static_cast<int>(weights_[l].size() + biases_[l].size());
  }
  Matrix g = grad_out;
  for (size_t l = weights_.size(); l-- > 0;) {
    const Matrix& h = cache.activations[l];
    const int wsize = static_cast<int>(weights_[l].size());
    Eigen::Map<Matrix> dw(grad.data() + offset[l], weights_[l].rows(), weights_[l].cols());
    dw.noalias() += g * h.transpose();
    grad.segment(offset[l] + wsize, biases_[l].size()) += g.rowwise().sum();
    if (l > 0) {
      Matrix back = weights_[l].transpose() * g;
      g = back.array() * (1.0 - h.array().square());
    }
  }
}

int Mlp::NumParams() const {
  int n = 0;
  for (size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

void Mlp::Flatten(Vector& out, int offset) const {
  for (size_t l = 0; l < weights_.size(); ++l) {
    out.segment(offset, weights_[l].size()) =
        Eigen::Map<const Vector>(weights_[l].data(), weights_[l].size());
    offset += weights_[l].size();
    out.segment(offset, biases_[l].size()) = biases_[l];
    offset += biases_[l].size();
  }
}

void Mlp::Unflatten(const Vector& in, int offset) {
  for (size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Vector>(weights_[l].data(), weights_[l].size()) =
        in.segment(offset, weights_[l].size());
    offset += weights_[l].size();
    biases_[l] = in.segment(offset, biases_[l].size());
    offset += biases_[l].size();
  }
}

// --- RunningNorm -------------------------------------------------------------

void RunningNorm::Init(int dim) {
  mean = Vector::Zero(dim);
  var = Vector::Ones(dim);
  count = 1e-4;
}

void RunningNorm::Update(const Matrix& batch) {
  const double n = static_cast<double>(batch.cols());
  if (n == 0) return;
  const Vector bmean = batch.rowwise().mean();
  const Vector bvar = (batch.colwise() - bmean).array().square().rowwise().sum() / n;
  const Vector delta = bmean - mean;
  const double total = count + n;
  mean += delta * (n / total);
  var = (var * count + bvar * n + delta.array().square().matrix() * (count * n / total)) / total;
  count = total;
}

Matrix RunningNorm::Apply(const Matrix& batch) const {
  const Vector inv = (var.array() + 1e-8).rsqrt();
  Matrix out = (batch.colwise() - mean).array().colwise() * inv.array();
  return out.cwiseMax(-10.0).cwiseMin(10.0);
}

// --- ActorCritic -------------------------------------------------------------

ActorCritic::ActorCritic(int input_dim, const std::vector<int>& hidden, uint64_t seed)
    : input_dim_(input_dim) {
  std::mt19937_64 rng(seed);
  actor_ = Mlp(input_dim, hidden, kActionDim, rng, 0.01);
  critic_ = Mlp(input_dim, hidden, 1, rng, 1.0);
  log_std_ = Vector::Zero(kActionDim);
}

int ActorCritic::NumParams() const {
  return actor_.NumParams() + critic_.NumParams() + static_cast<int>(log_std_.size());
}

Vector ActorCritic::Params() const {
  Vector p(NumParams());
  actor_.Flatten(p, 0);
  critic_.Flatten(p, actor_.NumParams());
  p.tail(log_std_.size()) = log_std_;
  return p;
}

void ActorCritic::SetParams(const Vector& p) {
  actor_.Unflatten(p, 0);
  critic_.Unflatten(p, actor_.NumParams());
  log_std_ = p.tail(log_std_.size());
}

Vector ActorCritic::Value(const Matrix& x) const { return critic_.Forward(x).row(0).transpose(); }

double GaussianLogProb(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& mean,
                       const Eigen::Ref<const Vector>& log_std) {
  double lp = 0.0;
  for (int d = 0; d < u.size(); ++d) {
    const double z = (u[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d] - kHalfLog2Pi;
  }
  return lp;
}

// --- GAE ---------------------------------------------------------------------

GaeResult Gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const char> dones, double gamma, double lambda) {
  const size_t t_len = rewards.size();
  if (values.size() != t_len + 1 || dones.size() != t_len) {
    throw ShapeMismatch("gae: " + std::to_string(t_len) + " rewards need " +
                        std::to_string(t_len + 1) + " values and " + std::to_string(t_len) +
                        " dones");
  }
  GaeResult r;
  r.advantages.assign(t_len, 0.0);
  r.returns.assign(t_len, 0.0);
  double running = 0.0;
  for (size_t t = t_len; t-- > 0;) {
    const double keep = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * keep - values[t];
    running = delta + gamma * lambda * keep * running;
    r.advantages[t] = running;
    r.returns[t] = running + values[t];
  }
  return r;
}

// --- Loss --------------------------------------------------------------------

PpoLossTerms PpoLoss(const ActorCritic& model, const PpoBatch& batch, const PpoHyper& hyper,
                     Vector* grad) {
  const int b = batch.size();
  const double inv_b = 1.0 / b;
  PpoLossTerms terms;

  Vector adv = batch.advantages;
  const double mean_adv = adv.mean();
  adv.array() -= mean_adv;
  const double std_adv = std::sqrt(adv.squaredNorm() * inv_b);
  adv /= (std_adv + 1e-8);

  Mlp::Cache actor_cache, critic_cache;
  const Matrix mu = model.actor_.Forward(batch.inputs, grad ? &actor_cache : nullptr);
  const Matrix v = model.critic_.Forward(batch.inputs, grad ? &critic_cache : nullptr);
  const Vector inv_std = (-model.log_std_).array().exp();
  const Matrix z = (batch.pre_squash - mu).array().colwise() * inv_std.array();

  Vector dlogp(b);
  for (int j = 0; j < b; ++j) {
    double lp = 0.0;
    for (int d = 0; d < kActionDim; ++d) {
      lp += -0.5 * z(d, j) * z(d, j) - model.log_std_[d] - kHalfLog2Pi;
    }
    const double log_ratio = lp - batch.log_probs[j];
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps);
    const double unclipped_obj = ratio * adv[j];
    const double clipped_obj = clipped * adv[j];
    terms.policy -= std::min(unclipped_obj, clipped_obj) * inv_b;
    dlogp[j] = unclipped_obj <= clipped_obj ? -adv[j] * ratio * inv_b : 0.0;
    terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
    if (std::abs(ratio - 1.0) > hyper.clip_eps) terms.clip_fraction += inv_b;
  }
  const Vector verr = v.row(0).transpose() - batch.returns;
  terms.value = 0.5 * verr.squaredNorm() * inv_b;
  terms.entropy = (model.log_std_.array() + 0.5 + kHalfLog2Pi).sum();
  terms.total = terms.policy + hyper.value_coef * terms.value - hyper.entropy_coef * terms.entropy;

  if (grad) {
    grad->setZero(model.NumParams());
    // d logp / d mu = z / sigma; d logp / d log_std = z^2 - 1.
    const Matrix grad_mu =
        (z.array().colwise() * inv_std.array()).rowwise() * dlogp.transpose().array();
    Vector actor_grad = Vector::Zero(model.actor_.NumParams());
    model.actor_.Backward(actor_cache, grad_mu, actor_grad);
    Vector critic_grad = Vector::Zero(model.critic_.NumParams());
    const Matrix grad_v = (hyper.value_coef * inv_b) * verr.transpose();
    model.critic_.Backward(critic_cache, grad_v, critic_grad);
    grad->head(actor_grad.size()) = actor_grad;
    grad->segment(actor_grad.size(), critic_grad.size()) = critic_grad;
    Vector g_std = (z.array().square() - 1.0).matrix() * dlogp;
    g_std.array() -= hyper.entropy_coef;
    grad->tail(kActionDim) = g_std;
  }
  return terms;
}

void Adam::Step(Vector& params, const Vector& grad, double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
  v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kBeta1, t_);
  const double c2 = 1.0 - std::pow(kBeta2, t_);
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
}

PpoMetrics PpoUpdate(ActorCritic& model, Adam& adam, const PpoBatch& batch,
                     const PpoHyper& hyper, std::mt19937_64& rng) {
  const Vector start = model.Params();
  const Adam adam_start = adam;
  if (adam.m_.size() != start.size()) adam = Adam(static_cast<int>(start.size()));
  PpoMetrics metrics;
  const int n = batch.size();
  const int mb = std::max(1, n / std::max(1, hyper.minibatches));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Vector params = start;
  Vector grad;
  PpoBatch sub;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Shuffle(order, rng);
    for (int s = 0; s + mb <= n; s += mb) {
      sub.inputs.resize(batch.inputs.rows(), mb);
      sub.pre_squash.resize(kActionDim, mb);
      sub.log_probs.resize(mb);
      sub.advantages.resize(mb);
      sub.returns.resize(mb);
      for (int j = 0; j < mb; ++j) {
        const int i = order[s + j];
        sub.inputs.col(j) = batch.inputs.col(i);
        sub.pre_squash.col(j) = batch.pre_squash.col(i);
        sub.log_probs[j] = batch.log_probs[i];
        sub.advantages[j] = batch.advantages[i];
        sub.returns[j] = batch.returns[i];
      }
      const PpoLossTerms terms = PpoLoss(model, sub, hyper, &grad);
      if (!std::isfinite(terms.total) || !AllFinite(grad)) {
        model.SetParams(start);
        adam = adam_start;
        throw NonFiniteLoss("non-finite loss in ppo update (epoch " + std::to_string(epoch) +
                            ")");
      }
      const double norm = grad.norm();
      if (hyper.max_grad_norm > 0.0 && norm > hyper.max_grad_norm) {
        grad *= hyper.max_grad_norm / norm;
      }
      adam.Step(params, grad, hyper.lr);
      model.SetParams(params);
      metrics.last = terms;
      metrics.mean_approx_kl += terms.approx_kl;
      metrics.mean_clip_fraction += terms.clip_fraction;
      ++metrics.minibatch_steps;
    }
  }
  if (metrics.minibatch_steps > 0) {
    metrics.mean_approx_kl /= metrics.minibatch_steps;
    metrics.mean_clip_fraction /= metrics.minibatch_steps;
  }
  return metrics;
}

// --- Training ------------------------------------------------------------------

std::string ToString(GoalMode m) {
  switch (m) {
    case GoalMode::kTask:
      return "task";
    case GoalMode::kUniform:
      return "uniform";
    case GoalMode::kMega:
      return "mega";
    case GoalMode::kSfl:
      return "sfl";
  }
  return "task";
}

GoalMode ParseGoalMode(const std::string& s) {
  if (s == "task") return GoalMode::kTask;
  if (s == "uniform") return GoalMode::kUniform;
  if (s == "mega") return GoalMode::kMega;
  if (s == "sfl") return GoalMode::kSfl;
  throw ConfigError("unknown goal mode '" + s + "'");
}

std::string TrainConfig::Canonical() const {
  std::ostringstream os;
  os << "task=" << task << ";protocol=" << ToString(protocol)
     << ";reward=" << ToString(reward.shape) << "/" << ToString(reward.matching)
     << ";physics=" << physics.Hash() << ";hidden=";
  for (int h : hidden) os << h << ",";
  os << ";normalize_obs=" << normalize_obs << ";goal_mode=" << ToString(goal_mode);
  return os.str();
}

int PolicyInputDim(int n, int k) { return ObservationSize(n) + 3 * k; }

Action PpoPolicy::Act(const Observation& obs, std::span<const double> goal) {
  Matrix x(obs.size() + goal.size(), 1);
  for (size_t i = 0; i < obs.size(); ++i) x(i, 0) = obs[i];
  for (size_t i = 0; i < goal.size(); ++i) x(obs.size() + i, 0) = goal[i];
  const Matrix mu = model_.Mean(normalize_ ? norm_.Apply(x) : x);
  Action a;
  for (int d = 0; d < kActionDim; ++d) a[d] = std::tanh(mu(d, 0));
  return a;
}

namespace {

const TaskSpec& RequireTask(const std::string& name) {
  const TaskSpec* t = FindTask(BuiltinRegistry(), name);
  if (!t) throw ConfigError("unknown task '" + name + "'");
  return *t;
}

// Uniform goal box for the uniform-goal baseline.
std::vector<Vec3> UniformGoal(int n, std::mt19937_64& rng) {
  std::vector<Vec3> g;
  for (int i = 0; i < n; ++i) {
    g.emplace_back(-0.2 + 0.4 * Uniform01(rng), -0.2 + 0.4 * Uniform01(rng),
                   kCubeHalfExtent + 0.18 * Uniform01(rng));
  }
  return g;
}

std::vector<Vec3> ToTargets(const std::vector<double>& flat) {
  std::vector<Vec3> t;
  for (size_t i = 0; i + 2 < flat.size(); i += 3) t.emplace_back(flat[i], flat[i + 1], flat[i + 2]);
  return t;
}

class Trainer {
 public:
  Trainer(const TrainConfig& config)
      : cfg_(config),
        task_(RequireTask(config.task)),
        self_supervised_(config.protocol == Protocol::kSelfSupervised &&
                         config.goal_mode != GoalMode::kTask),
        k_(self_supervised_ ? task_.n : task_.k()),
        rng_(config.seed ^ 0x5eedULL),
        buffer_(config.goal_buffer_capacity) {
    for (const std::string& name : config.eval_tasks) eval_tasks_.push_back(RequireTask(name));
    if (eval_tasks_.empty()) eval_tasks_.push_back(task_);
    for (const TaskSpec& t : eval_tasks_) {
      if (t.n != task_.n || t.k() != k_) {
        throw ConfigError("eval task '" + t.name + "' does not match the policy input shape");
      }
    }
    input_dim_ = PolicyInputDim(task_.n, k_);
    result_.model = ActorCritic(input_dim_, config.hidden, config.seed);
    result_.model.log_std_.setConstant(config.init_log_std);
    result_.norm.Init(input_dim_);
    adam_ = Adam(result_.model.NumParams());
    if (config.threads > 1) pool_ = std::make_unique<ThreadPool>(config.threads);
    EnvConfig ec;
    ec.protocol = config.protocol;
    ec.n = task_.n;
    ec.reward = config.reward;
    ec.physics = config.physics;
    envs_.assign(config.num_envs, Env(ec));
    goals_.resize(config.num_envs);
    goal_slot_.assign(config.num_envs, -1);
    episodes_.assign(config.num_envs, 0);
    for (int e = 0; e < config.num_envs; ++e) ResetEnv(e);
  }

  TrainResult Run(const TrainLogger& log) {
    Evaluate(0, log);
    for (int u = 1; u <= cfg_.total_updates; ++u) {
      PrepareSfl();
      const PpoBatch batch = Collect();
      PpoUpdate(result_.model, adam_, batch, cfg_.ppo, rng_);
      if (cfg_.eval_every > 0 && u % cfg_.eval_every == 0) Evaluate(u, log);
    }
    return std::move(result_);
  }

 private:
  void Evaluate(int update, const TrainLogger& log) {
    PpoPolicy policy(result_.model, result_.norm, cfg_.normalize_obs);
    EvalOptions opts;
    opts.protocol = cfg_.protocol;
    opts.reward = cfg_.reward;
    opts.physics = cfg_.physics;
    CurvePoint p;
    p.update = update;
    p.env_steps = result_.env_steps;
    p.report = builderbench::Evaluate(policy, eval_tasks_, cfg_.eval_episodes,
                                      EpisodeSeed(cfg_.seed, 0xe7a1, update), opts);
    result_.curve.push_back(p);
    if (log) log(p);
  }

  void PrepareSfl() {
    if (cfg_.goal_mode != GoalMode::kSfl || !self_supervised_) return;
    // Refresh the candidate pool from the buffer once most goals were tried.
    int tried = 0;
    for (const GoalStats& g : sfl_pool_) tried += g.attempts > 0;
    if (!buffer_.empty() && (sfl_pool_.empty() || tried * 4 >= 3 * static_cast<int>(sfl_pool_.size()))) {
      sfl_pool_.clear();
      for (int i = 0; i < cfg_.sfl_pool; ++i) {
        const size_t idx = static_cast<size_t>(Uniform01(rng_) * static_cast<double>(buffer_.size()));
        sfl_pool_.push_back({buffer_.entry(idx), 0, 0});
      }
      std::fill(goal_slot_.begin(), goal_slot_.end(), -1);
    }
    if (!sfl_pool_.empty()) {
      sfl_queue_ = SflSelect(sfl_pool_, cfg_.num_envs, cfg_.sfl_epsilon, rng_);
      sfl_next_ = 0;
    }
  }

  std::vector<Vec3> SampleGoal(int e) {
    const Env& env = envs_[e];
    goal_slot_[e] = -1;
    switch (cfg_.goal_mode) {
      case GoalMode::kTask:
        return task_.target_positions;
      case GoalMode::kUniform:
        return UniformGoal(task_.n, rng_);
      case GoalMode::kMega:
        if (buffer_.empty()) return CubePositions(env.world());
        return ToTargets(MegaSample(buffer_, rng_, cfg_.mega_candidates));
      case GoalMode::kSfl:
        if (sfl_pool_.empty()) return CubePositions(env.world());
        if (sfl_next_ >= sfl_queue_.size()) {
          sfl_queue_ = SflSelect(sfl_pool_, cfg_.num_envs, cfg_.sfl_epsilon, rng_);
          sfl_next_ = 0;
        }
        goal_slot_[e] = static_cast<int>(sfl_queue_[sfl_next_++]);
        return ToTargets(sfl_pool_[goal_slot_[e]].goal);
    }
    return task_.target_positions;
  }

  void ResetEnv(int e) {
    envs_[e].Reset(EpisodeSeed(cfg_.seed, e, episodes_[e]++), &task_);
    if (self_supervised_) {
      goals_[e] = SampleGoal(e);
      envs_[e].SetTargets(goals_[e]);
    } else {
      goals_[e] = task_.target_positions;
    }
  }

  void FillInput(int e, const Observation& obs, Matrix& x, int col) const {
    for (size_t i = 0; i < obs.size(); ++i) x(i, col) = obs[i];
    const std::vector<double> g = FlattenTargets(goals_[e]);
    for (size_t i = 0; i < g.size(); ++i) x(obs.size() + i, col) = g[i];
  }

  Matrix Normalize(const Matrix& raw) const {
    return cfg_.normalize_obs ? result_.norm.Apply(raw) : raw;
  }

  PpoBatch Collect() {
    const int E = cfg_.num_envs;
    const int T = cfg_.rollout_steps;
    const ActorCritic& model = result_.model;
    PpoBatch batch;
    batch.inputs.resize(input_dim_, T * E);
    batch.pre_squash.resize(kActionDim, T * E);
    batch.log_probs.resize(T * E);
    Matrix raw_all(input_dim_, T * E);
    std::vector<double> rewards(T * E), values((T + 1) * E);
    std::vector<char> dones(T * E);

    Matrix raw(input_dim_, E);
    for (int e = 0; e < E; ++e) FillInput(e, envs_[e].Observe(), raw, e);
    std::vector<Action> actions(E);
    const Vector std_dev = model.log_std_.array().exp();
    for (int t = 0; t < T; ++t) {
      const Matrix x = Normalize(raw);
      const Matrix mu = model.Mean(x);
      const Vector v = model.Value(x);
      for (int e = 0; e < E; ++e) {
        const int col = t * E + e;
        Vector u(kActionDim);
        for (int d = 0; d < kActionDim; ++d) u[d] = mu(d, e) + std_dev[d] * Normal(rng_);
        for (int d = 0; d < kActionDim; ++d) actions[e][d] = std::tanh(u[d]);
        batch.pre_squash.col(col) = u;
        batch.log_probs[col] = GaussianLogProb(u, mu.col(e), model.log_std_);
        batch.inputs.col(col) = x.col(e);
        raw_all.col(col) = raw.col(e);
        values[t * E + e] = v[e];
      }
      std::vector<StepResult> results = BatchStep(envs_, actions, pool_.get());
      result_.env_steps += E;
      std::vector<int> finished;
      for (int e = 0; e < E; ++e) {
        rewards[t * E + e] = results[e].reward;
        dones[t * E + e] = results[e].done;
        if (self_supervised_) buffer_.RecordVisit(envs_[e].world());
        FillInput(e, results[e].observation, raw, e);
        if (results[e].done) finished.push_back(e);
      }
      if (!finished.empty()) {
        // Episodes end on the time limit only: bootstrap from the final state.
        Matrix last(input_dim_, finished.size());
        for (size_t i = 0; i < finished.size(); ++i) last.col(i) = raw.col(finished[i]);
        const Vector v_last = model.Value(Normalize(last));
        for (size_t i = 0; i < finished.size(); ++i) {
          const int e = finished[i];
          rewards[t * E + e] += cfg_.gamma * v_last[i];
          if (goal_slot_[e] >= 0 && goal_slot_[e] < static_cast<int>(sfl_pool_.size())) {
            GoalStats& s = sfl_pool_[goal_slot_[e]];
            ++s.attempts;
            s.successes += results[e].info.success ? 1 : 0;
          }
          ResetEnv(e);
          FillInput(e, envs_[e].Observe(), raw, e);
        }
      }
    }
    const Vector v_end = model.Value(Normalize(raw));
    for (int e = 0; e < E; ++e) values[T * E + e] = v_end[e];

    batch.advantages.resize(T * E);
    batch.returns.resize(T * E);
    std::vector<double> r(T), v(T + 1);
    std::vector<char> d(T);
    for (int e = 0; e < E; ++e) {
      for (int t = 0; t < T; ++t) {
        r[t] = rewards[t * E + e];
        v[t] = values[t * E + e];
        d[t] = dones[t * E + e];
      }
      v[T] = values[T * E + e];
      const GaeResult g = Gae(r, v, d, cfg_.gamma, cfg_.lambda);
      for (int t = 0; t < T; ++t) {
        batch.advantages[t * E + e] = g.advantages[t];
        batch.returns[t * E + e] = g.returns[t];
      }
    }
    if (cfg_.normalize_obs) result_.norm.Update(raw_all);
    return batch;
  }

  TrainConfig cfg_;
  const TaskSpec& task_;
  bool self_supervised_;
  int k_;
  int input_dim_ = 0;
  std::mt19937_64 rng_;
  GoalBuffer buffer_;
  std::vector<GoalStats> sfl_pool_;
  std::vector<size_t> sfl_queue_;
  size_t sfl_next_ = 0;
  std::vector<TaskSpec> eval_tasks_;
  std::vector<Env> envs_;
  std::vector<std::vector<Vec3>> goals_;
  std::vector<int> goal_slot_;
  std::vector<uint64_t> episodes_;
  std::unique_ptr<ThreadPool> pool_;
  Adam adam_;
  TrainResult result_;
};

constexpr char kCheckpointMagic[8] = {'B', 'B', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void WritePod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint truncated");
  return v;
}

void WriteVector(std::ofstream& out, const Vector& v) {
  WritePod<uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
}

Vector ReadVector(std::ifstream& in, int64_t expected) {
  const uint64_t n = ReadPod<uint64_t>(in);
  if (static_cast<int64_t>(n) != expected) throw ParseError("checkpoint array size mismatch");
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()), sizeof(double) * n);
  if (!in) throw ParseError("checkpoint truncated");
  return v;
}

}  // namespace

TrainResult Train(const TrainConfig& config, const TrainLogger& log) {
  if (config.num_envs < 1 || config.rollout_steps < 1 || config.total_updates < 0) {
    throw ConfigError("num_envs, rollout_steps must be positive");
  }
  Trainer trainer(config);
  return trainer.Run(log);
}

void SaveCheckpoint(const std::string& path, const TrainConfig& config, const ActorCritic& model,
                    const RunningNorm& norm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  WritePod<uint32_t>(out, kCheckpointVersion);
  WritePod<uint64_t>(out, config.Hash());
  WritePod<int32_t>(out, model.input_dim());
  WriteVector(out, model.Params());
  WriteVector(out, norm.mean);
  WriteVector(out, norm.var);
  WritePod<double>(out, norm.count);
}

void LoadCheckpoint(const std::string& path, const TrainConfig& config, ActorCritic& model,
                    RunningNorm& norm) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError(path + ": not a checkpoint");
  }
  const uint32_t version = ReadPod<uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const uint64_t hash = ReadPod<uint64_t>(in);
  if (hash != config.Hash()) throw HashMismatch(path + ": checkpoint was written for another config");
  const int32_t input_dim = ReadPod<int32_t>(in);
  const TaskSpec* task = FindTask(BuiltinRegistry(), config.task);
  const bool self_sup = config.protocol == Protocol::kSelfSupervised &&
                        config.goal_mode != GoalMode::kTask;
  if (task && input_dim != PolicyInputDim(task->n, self_sup ? task->n : task->k())) {
    throw ParseError(path + ": input width does not match the task");
  }
  ActorCritic fresh(input_dim, config.hidden, 0);
  fresh.SetParams(ReadVector(in, fresh.NumParams()));
  RunningNorm n;
  n.mean = ReadVector(in, input_dim);
  n.var = ReadVector(in, input_dim);
  n.count = ReadPod<double>(in);
  model = std::move(fresh);
  norm = std::move(n);
}

}  // namespace builderbench
