#include "equiaug/crr.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace equiaug::rl {

namespace {

Matrix hcat2(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

Matrix hcat3(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix out(a.rows(), a.cols() + b.cols() + c.cols());
  out.leftCols(a.cols()) = a;
  out.middleCols(a.cols(), b.cols()) = b;
  out.rightCols(c.cols()) = c;
  return out;
}

struct BatchArrays {
  Matrix s, a, s2, g;
  Vector r;
  Vector done;
};

BatchArrays gather(const data::Dataset& d, std::span<const std::size_t> batch) {
  BatchArrays arr;
  const auto n = static_cast<index_t>(batch.size());
  arr.s.resize(n, d.sdim);
  arr.a.resize(n, d.adim);
  arr.s2.resize(n, d.sdim);
  arr.g.resize(n, d.gdim);
  arr.r.resize(n);
  arr.done.resize(n);
  for (index_t i = 0; i < n; ++i) {
    const data::Transition& tr = d.transitions[batch[i]];
    arr.s.row(i) = tr.s.transpose();
    arr.a.row(i) = tr.a.transpose();
    arr.s2.row(i) = tr.s2.transpose();
    arr.g.row(i) = tr.g.transpose();
    arr.r[i] = tr.r;
    arr.done[i] = tr.done ? 1.0 : 0.0;
  }
  return arr;
}

}  // namespace

Vector policy_mean(const GaussianPolicy& p, const Vector& s, const Vector& g) {
  Vector input(p.sdim + p.gdim);
  input.head(p.sdim) = s;
  input.tail(p.gdim) = g;
  return diff::mlp_forward(p.net, input);
}

Matrix policy_mean(const GaussianPolicy& p, const Matrix& states, const Matrix& goals) {
  return diff::mlp_forward(p.net, hcat2(states, goals));
}

Vector policy_action(const GaussianPolicy& p, const Vector& s, const Vector& g) {
  return policy_mean(p, s, g).array().tanh().matrix();
}

Vector policy_sample(const GaussianPolicy& p, const Vector& s, const Vector& g, Rng& rng) {
  Vector mean = policy_mean(p, s, g);
  for (index_t i = 0; i < mean.size(); ++i) mean[i] += p.std() * rng.normal();
  return mean.array().tanh().matrix();
}

scalar_t critic_value(const diff::MlpNetwork& net, const Vector& s, const Vector& a,
                      const Vector& g) {
  Vector input(s.size() + a.size() + g.size());
  input << s, a, g;
  return diff::mlp_forward(net, input)[0];
}

scalar_t td_target(scalar_t r, bool done, scalar_t q_next, scalar_t discount) {
  require(r == 0.0 || r == 1.0, "td_target: reward must be 0 or 1");
  return r + discount * (done ? 0.0 : 1.0) * q_next;
}

scalar_t crr_weight(scalar_t advantage, scalar_t temperature, scalar_t clip) {
  return std::min(std::exp(advantage / temperature), clip);
}

scalar_t advantage(const QCritic& critic, const Vector& s, const Vector& a, const Vector& g,
                   const GaussianPolicy& policy, int m, Rng& rng) {
  require(m >= 1, "advantage: m must be >= 1");
  const scalar_t q_data = critic_value(critic.net, s, a, g);
  scalar_t baseline = 0.0;
  for (int j = 0; j < m; ++j)
    baseline += critic_value(critic.net, s, policy_sample(policy, s, g, rng), g);
  return q_data - baseline / static_cast<scalar_t>(m);
}

CrrDiagnostics crr_update(GaussianPolicy& policy, QCritic& critic, const data::Dataset& d,
                          std::span<const std::size_t> batch, const CrrConfig& cfg,
                          CrrState& state, Rng& rng) {
  require(!batch.empty(), "crr_update: empty batch");
  const BatchArrays arr = gather(d, batch);
  const auto n = static_cast<index_t>(batch.size());
  CrrDiagnostics diag;

  if (!cfg.behavior_cloning_only) {
    // Critic: fitted-Q step toward r + gamma (1-done) Q_target(s2, pi(s2,g), g).
    const Matrix a2 = policy_mean(policy, arr.s2, arr.g).array().tanh().matrix();
    const Matrix q_next = diff::mlp_forward(critic.target, hcat3(arr.s2, a2, arr.g));
    Matrix y(n, 1);
    for (index_t i = 0; i < n; ++i)
      y(i, 0) = td_target(arr.r[i], arr.done[i] > 0.0, q_next(i, 0), cfg.discount);

    diff::Tape tape;
    diff::MlpOnTape params = diff::mlp_on_tape(tape, critic.net);
    const diff::NodeId q = diff::mlp_forward(
        tape, critic.net, params, tape.constant(hcat3(arr.s, arr.a, arr.g)));
    const diff::NodeId loss = diff::mse(tape, q, tape.constant(y));
    diag.critic_loss = tape.value_scalar(loss);
    if (!std::isfinite(diag.critic_loss))
      throw NumericalError("crr_update: non-finite critic loss");
    tape.backward(loss);
    state.critic_opt.step(diff::mlp_params(critic.net), diff::mlp_grads(tape, params));

    ++state.critic_updates;
    if (state.critic_updates % cfg.target_period == 0) critic.target = critic.net;
  }

  // Policy: advantage-weighted regression onto the batch actions.
  Matrix weights = Matrix::Ones(n, 1);
  if (!cfg.behavior_cloning_only) {
    for (index_t i = 0; i < n; ++i) {
      const scalar_t adv =
          advantage(critic, arr.s.row(i).transpose(), arr.a.row(i).transpose(),
                    arr.g.row(i).transpose(), policy, cfg.advantage_samples, rng);
      weights(i, 0) = crr_weight(adv, cfg.temperature, cfg.weight_clip);
    }
  }
  diag.mean_weight = weights.mean();

  {
    diff::Tape tape;
    diff::MlpOnTape params = diff::mlp_on_tape(tape, policy.net);
    const diff::NodeId mu = diff::mlp_forward(
        tape, policy.net, params, tape.constant(hcat2(arr.s, arr.g)));
    const diff::NodeId err = diff::sub(tape, tape.constant(arr.a), mu);
    const diff::NodeId sq_rows = diff::row_sums(tape, tape.square(err));
    const scalar_t var = policy.std() * policy.std();
    const scalar_t log_norm =
        static_cast<scalar_t>(policy.adim) * (policy.log_std + 0.5 * std::log(2.0 * M_PI));
    const diff::NodeId logp =
        diff::add_scalar(tape, diff::scale(tape, sq_rows, -0.5 / var), -log_norm);
    const diff::NodeId loss =
        diff::neg(tape, tape.mean(tape.mul(tape.constant(weights), logp)));
    diag.policy_loss = tape.value_scalar(loss);
    if (!std::isfinite(diag.policy_loss))
      throw NumericalError("crr_update: non-finite policy loss");
    tape.backward(loss);
    state.policy_opt.step(diff::mlp_params(policy.net), diff::mlp_grads(tape, params));
  }

  return diag;
}

namespace {

std::pair<GaussianPolicy, QCritic> train_impl(const data::Dataset& d, const CrrConfig& cfg) {
  require(!d.empty(), "train: empty dataset");
  require(cfg.discount > 0.0 && cfg.discount < 1.0, "train: discount must be in (0,1)");
  require(cfg.temperature > 0.0, "train: temperature must be positive");

  Rng rng(cfg.seed);
  GaussianPolicy policy;
  policy.sdim = d.sdim;
  policy.gdim = d.gdim;
  policy.adim = d.adim;
  policy.log_std = std::log(cfg.policy_std);
  policy.net = diff::mlp_init(d.sdim + d.gdim, cfg.hidden_dims, d.adim, rng.next_u64());

  QCritic critic;
  critic.sdim = d.sdim;
  critic.adim = d.adim;
  critic.gdim = d.gdim;
  critic.net = diff::mlp_init(d.sdim + d.adim + d.gdim, cfg.hidden_dims, 1, rng.next_u64());
  critic.target = critic.net;

  CrrState state;
  state.policy_opt = diff::Optimizer({.learning_rate = cfg.policy_lr});
  state.critic_opt = diff::Optimizer({.learning_rate = cfg.critic_lr});

  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
  for (int step = 0; step < cfg.gradient_steps; ++step) {
    for (std::size_t& idx : batch) idx = rng.below(d.size());
    crr_update(policy, critic, d, batch, cfg, state, rng);
  }
  return {std::move(policy), std::move(critic)};
}

}  // namespace

std::pair<GaussianPolicy, QCritic> train_crr(const data::Dataset& d, const CrrConfig& cfg) {
  return train_impl(d, cfg);
}

GaussianPolicy train_bc(const data::Dataset& d, const CrrConfig& cfg) {
  CrrConfig bc_cfg = cfg;
  bc_cfg.behavior_cloning_only = true;
  return train_impl(d, bc_cfg).first;
}

RolloutResult rollout(const env::Environment& e, const GaussianPolicy& policy,
                      const Vector& goal, int horizon, Rng& rng) {
  require(horizon >= 1, "rollout: horizon must be >= 1");
  RolloutResult result;
  Vector s = e.sample_initial_state(rng);
  result.states.push_back(s);
  scalar_t total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const Vector a = policy_action(policy, s, goal);
    s = e.step(s, a);
    total += e.reward(s, goal);
    result.states.push_back(s);
  }
  result.episode_return = total / static_cast<scalar_t>(horizon);
  return result;
}

SplitReport summarize(std::vector<scalar_t> returns) {
  SplitReport rep;
  rep.returns = std::move(returns);
  const auto n = static_cast<scalar_t>(rep.returns.size());
  for (scalar_t r : rep.returns) rep.mean += r;
  rep.mean /= n;
  if (rep.returns.size() > 1) {
    scalar_t ss = 0.0;
    for (scalar_t r : rep.returns) ss += (r - rep.mean) * (r - rep.mean);
    rep.stderr_mean = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return rep;
}

SplitReport evaluate_split(const env::Environment& e, const GaussianPolicy& policy,
                           env::GoalSplit split, int episodes, int horizon, Rng rng) {
  require(episodes >= 1, "evaluate_split: episodes must be >= 1");
  const std::vector<Vector> goals = e.sample_goals(split, episodes, rng);
  std::vector<scalar_t> returns(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    Rng episode_rng = rng.derive(static_cast<std::uint64_t>(ep));
    returns[static_cast<std::size_t>(ep)] =
        rollout(e, policy, goals[static_cast<std::size_t>(ep)], horizon, episode_rng)
            .episode_return;
  }
  return summarize(std::move(returns));
}

EvalReport evaluate_policy(const env::Environment& e, const GaussianPolicy& policy,
                           int episodes, int horizon, Rng rng) {
  EvalReport report;
  report.episodes = episodes;
  report.horizon = horizon;
  report.train = evaluate_split(e, policy, env::GoalSplit::train, episodes, horizon,
                                rng.derive(1));
  report.test = evaluate_split(e, policy, env::GoalSplit::test, episodes, horizon,
                               rng.derive(2));
  return report;
}

void save_policy(const GaussianPolicy& p, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["log_std"] = p.log_std;
  doc["sdim"] = p.sdim;
  doc["gdim"] = p.gdim;
  doc["adim"] = p.adim;
  const std::filesystem::path weights = path;
  diff::save_mlp(p.net, weights);
  // Side fields ride in a companion file next to the weight JSON.
  std::filesystem::path meta = path;
  meta += ".meta";
  std::ofstream out(meta);
  require(out.good(), "save_policy: cannot open " + meta.string());
  out << doc.dump(1) << "\n";
}

GaussianPolicy load_policy(const std::filesystem::path& path) {
  GaussianPolicy p;
  p.net = diff::load_mlp(path);
  std::filesystem::path meta = path;
  meta += ".meta";
  std::ifstream in(meta);
  if (!in.good()) throw ParseError("load_policy: cannot open " + meta.string());
  nlohmann::json doc;
  try {
    in >> doc;
    p.log_std = doc.at("log_std").get<scalar_t>();
    p.sdim = doc.at("sdim").get<int>();
    p.gdim = doc.at("gdim").get<int>();
    p.adim = doc.at("adim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_policy meta: " + std::string(e.what()));
  }
  if (p.sdim + p.gdim != p.net.input_dim || p.net.output_dim != p.adim)
    throw SchemaError("load_policy: meta dims disagree with weights");
  return p;
}

}  // namespace equiaug::rl
