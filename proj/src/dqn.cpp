#include "frugalnn/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace frugalnn {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw UsageError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

void DqnHyper::validate() const {
  if (episodes < 0) throw UsageError("episodes must be non-negative");
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw UsageError("gamma must lie in [0, 1]");
  if (eps0 < 0.0 || eps0 > 1.0) throw UsageError("initial epsilon must lie in [0, 1]");
  if (!(eps_decay > 0.0 && eps_decay <= 1.0)) throw UsageError("epsilon decay must lie in (0, 1]");
  if (buffer_capacity < 1 || batch_size < 1 || sync_interval < 1) throw UsageError("buffer, batch and sync sizes must be positive");
}

void to_json(nlohmann::json& j, const DqnHyper& h) {
  j = {{"episodes", h.episodes},
       {"lr", h.lr},
       {"gamma", h.gamma},
       {"eps0", h.eps0},
       {"eps_decay", h.eps_decay},
       {"hidden", h.hidden},
       {"buffer_capacity", h.buffer_capacity},
       {"batch_size", h.batch_size},
       {"sync_interval", h.sync_interval},
       {"optimizer", to_string(h.optimizer)},
       {"seed", h.seed}};
}

void from_json(const nlohmann::json& j, DqnHyper& h) {
  const DqnHyper d;
  h.episodes = j.value("episodes", d.episodes);
  h.lr = j.value("lr", d.lr);
  h.gamma = j.value("gamma", d.gamma);
  h.eps0 = j.value("eps0", d.eps0);
  h.eps_decay = j.value("eps_decay", d.eps_decay);
  h.hidden = j.value("hidden", d.hidden);
  h.buffer_capacity = j.value("buffer_capacity", d.buffer_capacity);
  h.batch_size = j.value("batch_size", d.batch_size);
  h.sync_interval = j.value("sync_interval", d.sync_interval);
  h.optimizer = parse_optimizer(j.value("optimizer", to_string(d.optimizer)));
  h.seed = j.value("seed", d.seed);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw UsageError("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (items_.empty()) throw UsageError("cannot sample an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(n);
  for (auto& t : out) t = &items_[pick(rng)];
  return out;
}

void Optimizer::apply(QNet::Vec& params, const QNet::Vec& gradient) {
  if (kind_ == OptimizerKind::Sgd) {
    params.noalias() -= static_cast<float>(lr_) * gradient;
    return;
  }
  constexpr float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
  if (m_.size() != params.size()) {
    m_ = QNet::Vec::Zero(params.size());
    v_ = QNet::Vec::Zero(params.size());
  }
  ++step_;
  m_ = beta1 * m_ + (1.0f - beta1) * gradient;
  v_ = beta2 * v_ + (1.0f - beta2) * gradient.cwiseAbs2();
  const float c1 = 1.0f - std::pow(beta1, static_cast<float>(step_));
  const float c2 = 1.0f - std::pow(beta2, static_cast<float>(step_));
  params.array() -= static_cast<float>(lr_) * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

namespace {

QNet::Mat stack_states(std::span<const Transition* const> batch, bool next) {
  const Eigen::Index dim = batch.front()->state.size();
  QNet::Mat x(dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = (next ? batch[i]->next_state : batch[i]->state).cast<float>();
  return x;
}

}  // namespace

Vector double_targets(std::span<const Transition* const> batch, const QNet& online, const QNet& target, double gamma) {
  Vector y(static_cast<Eigen::Index>(batch.size()));
  if (batch.empty()) return y;
  const QNet::Mat next = stack_states(batch, true);
  const QNet::Mat q_online = online.forward(next);
  const QNet::Mat q_target = target.forward(next);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    const auto col = static_cast<Eigen::Index>(i);
    if (t.done || gamma == 0.0) {
      y(col) = t.reward;
      continue;
    }
    const int best = masked_argmax(q_online.col(col), t.next_mask);
    y(col) = t.reward + gamma * q_target(best, col);
  }
  return y;
}

double train_step(QNet& online, const QNet& target, std::span<const Transition* const> batch, double gamma,
                  Optimizer& optimizer) {
  if (batch.empty()) throw UsageError("train_step needs a non-empty batch");
  const Vector y = double_targets(batch, online, target, gamma);
  std::vector<int> actions(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) actions[i] = batch[i]->action;
  QNet::Vec grad;
  const double loss = online.loss(stack_states(batch, false), actions, y.cast<float>(), &grad);
  if (!std::isfinite(loss) || !grad.allFinite())
    throw DivergenceError("Q-network training diverged (loss = " + std::to_string(loss) + ")");
  optimizer.apply(online.parameters(), grad);
  return loss;
}

int act(const QNet& net, const Vector& state, const ActionMask& mask, double eps, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < eps) {
    std::vector<int> allowed;
    for (Eigen::Index a = 0; a < mask.size(); ++a)
      if (mask(a)) allowed.push_back(static_cast<int>(a));
    if (allowed.empty()) throw UsageError("mask allows no action");
    return allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)];
  }
  return masked_argmax(net.forward_one(state.cast<float>()), mask);
}

QNet make_network(int n_features, const DqnHyper& hyper, std::uint64_t seed) {
  QNet net(n_features + 1, hyper.hidden, n_features + 1);
  std::mt19937_64 rng(seed);
  net.init_uniform(rng);
  return net;
}

double epsilon_after(const DqnHyper& hyper, int episodes) {
  double eps = hyper.eps0;
  for (int e = 0; e < episodes; ++e) eps *= hyper.eps_decay;
  return eps;
}

TrainResult train_dqn(const Environment& env, double budget, const DqnHyper& hyper, const TrainObserver& observer) {
  hyper.validate();
  std::mt19937_64 rng(hyper.seed);
  TrainResult result;
  result.net = make_network(env.n_features(), hyper, rng());
  QNet target = result.net;
  ReplayBuffer buffer(static_cast<std::size_t>(hyper.buffer_capacity));
  Optimizer optimizer(hyper.optimizer, hyper.lr);
  std::uniform_int_distribution<int> pick_point(0, env.n_points() - 1);
  const int n = env.n_features();

  double eps = hyper.eps0;
  double block_sum = 0.0;
  int block_count = 0;
  for (int episode = 0; episode < hyper.episodes; ++episode) {
    EnvState s = env.reset(pick_point(rng), budget);
    double ret = 0.0;
    while (!s.done) {
      Vector x = env.encode(s);
      const ActionMask mask = env.mask(s);
      const int a = act(result.net, x, mask, eps, rng);
      StepResult r = env.step(s, Action::from_index(a, n));
      if (observer.on_step) observer.on_step(s, mask, a, r);
      ret += r.reward;
      buffer.push(Transition{std::move(x), a, r.reward, env.encode(r.next_state), env.mask(r.next_state), r.done});
      s = std::move(r.next_state);
      ++result.env_steps;

      if (buffer.size() >= static_cast<std::size_t>(hyper.batch_size)) {
        const auto batch = buffer.sample(static_cast<std::size_t>(hyper.batch_size), rng);
        train_step(result.net, target, batch, hyper.gamma, optimizer);
        if (++result.train_steps % hyper.sync_interval == 0) target = result.net;
      }
    }
    if (observer.on_episode) observer.on_episode(episode, eps);
    eps *= hyper.eps_decay;
    block_sum += ret;
    if (++block_count == 100) {
      result.reward_trace.push_back(block_sum / block_count);
      block_sum = 0.0;
      block_count = 0;
    }
  }
  if (block_count > 0) result.reward_trace.push_back(block_sum / block_count);
  result.final_epsilon = eps;
  return result;
}

nlohmann::json model_to_json(const DqnModel& model) {
  const auto& p = model.net.parameters();
  return {{"format", "frugalnn-dqn"},
          {"version", 1},
          {"budget", model.budget},
          {"alpha", model.alpha},
          {"hyper", model.hyper},
          {"network",
           {{"input_dim", model.net.input_dim()},
            {"hidden", model.net.hidden()},
            {"n_actions", model.net.n_actions()},
            {"parameters", std::vector<double>(p.data(), p.data() + p.size())}}},
          {"context", model.context}};
}

DqnModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "frugalnn-dqn" || j.at("version").get<int>() != 1)
      throw DataError("unsupported model file format");
    DqnModel m;
    m.budget = j.at("budget").get<double>();
    m.alpha = j.at("alpha").get<double>();
    m.hyper = j.at("hyper").get<DqnHyper>();
    const auto& jn = j.at("network");
    m.net = QNet(jn.at("input_dim").get<int>(), jn.at("hidden").get<std::vector<int>>(), jn.at("n_actions").get<int>());
    const auto params = jn.at("parameters").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(params.size()) != m.net.parameter_count())
      throw DataError("model file parameter count does not match its architecture");
    m.net.parameters() = Eigen::Map<const Vector>(params.data(), static_cast<Eigen::Index>(params.size())).cast<float>();
    m.context = j.value("context", nlohmann::json::object());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt model file: ") + e.what());
  }
}

void write_reward_trace_csv(std::span<const double> trace, std::ostream& out) {
  out << "episode_bucket,avg_reward\n";
  char buf[32];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trace[i]);
    out << i << ',' << buf << '\n';
  }
}

}  // namespace frugalnn
