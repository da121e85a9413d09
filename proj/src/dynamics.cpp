#include "equiaug/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "equiaug/optimizer.hpp"

namespace equiaug::dyn {

namespace {

struct Arrays {
  Matrix inputs;   // N x (sdim + adim)
  Matrix targets;  // N x sdim
};

Arrays to_arrays(const data::Dataset& d, bool predict_delta) {
  const auto n = static_cast<index_t>(d.size());
  Arrays arr;
  arr.inputs.resize(n, d.sdim + d.adim);
  arr.targets.resize(n, d.sdim);
  for (index_t i = 0; i < n; ++i) {
    const data::Transition& tr = d.transitions[i];
    arr.inputs.row(i).head(d.sdim) = tr.s.transpose();
    arr.inputs.row(i).tail(d.adim) = tr.a.transpose();
    if (predict_delta) {
      arr.targets.row(i) = (tr.s2 - tr.s).transpose();
    } else {
      arr.targets.row(i) = tr.s2.transpose();
    }
  }
  return arr;
}

Matrix take_rows(const Matrix& m, const std::vector<index_t>& rows) {
  Matrix out(static_cast<index_t>(rows.size()), m.cols());
  for (index_t i = 0; i < out.rows(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

}  // namespace

std::pair<DynamicsModel, TrainReport> train_dynamics_model(const data::Dataset& d,
                                                           const DynamicsModelConfig& cfg) {
  require(!d.empty(), "train_dynamics_model: empty dataset");
  require(cfg.batch_size >= 1, "train_dynamics_model: batch size must be >= 1");
  require(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0,
          "train_dynamics_model: validation fraction must be in [0, 1)");

  const auto wall_start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  const Arrays arr = to_arrays(d, cfg.predict_delta);
  const index_t n = arr.inputs.rows();

  std::vector<index_t> order(n);
  std::iota(order.begin(), order.end(), index_t{0});
  for (index_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i + 1))]);

  const auto n_val = static_cast<index_t>(std::floor(cfg.validation_fraction * n));
  std::vector<index_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<index_t> train_idx(order.begin() + n_val, order.end());
  require(!train_idx.empty(), "train_dynamics_model: no training rows left");

  DynamicsModel model;
  model.predict_delta = cfg.predict_delta;
  model.sdim = d.sdim;
  model.adim = d.adim;
  model.net = diff::mlp_init(d.sdim + d.adim, cfg.hidden_dims, d.sdim, rng.next_u64());

  diff::Optimizer opt({.learning_rate = cfg.learning_rate});
  TrainReport report;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = train_idx.size() - 1; i > 0; --i)
      std::swap(train_idx[i], train_idx[rng.below(i + 1)]);

    scalar_t epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto stop = std::min(start + static_cast<std::size_t>(cfg.batch_size),
                                 train_idx.size());
      std::vector<index_t> batch(train_idx.begin() + start, train_idx.begin() + stop);

      diff::Tape tape;
      diff::MlpOnTape params = diff::mlp_on_tape(tape, model.net);
      const diff::NodeId input = tape.constant(take_rows(arr.inputs, batch));
      const diff::NodeId pred = diff::mlp_forward(tape, model.net, params, input);
      const diff::NodeId loss =
          diff::mse(tape, pred, tape.constant(take_rows(arr.targets, batch)));

      const scalar_t loss_value = tape.value_scalar(loss);
      if (!std::isfinite(loss_value))
        throw NumericalError("train_dynamics_model: non-finite loss at epoch " +
                             std::to_string(epoch));
      tape.backward(loss);
      opt.step(diff::mlp_params(model.net), diff::mlp_grads(tape, params));

      epoch_loss += loss_value;
      ++n_batches;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<scalar_t>(n_batches));
  }

  if (!val_idx.empty()) {
    const Matrix pred = diff::mlp_forward(model.net, take_rows(arr.inputs, val_idx));
    report.validation_loss = diff::mse_value(pred, take_rows(arr.targets, val_idx));
  } else {
    report.validation_loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
  }
  report.wall_seconds =
      std::chrono::duration<scalar_t>(std::chrono::steady_clock::now() - wall_start).count();
  return {std::move(model), std::move(report)};
}

Vector predict_next(const DynamicsModel& m, const Vector& s, const Vector& a) {
  require(s.size() == m.sdim && a.size() == m.adim, "predict_next: dimension mismatch");
  Vector input(m.sdim + m.adim);
  input.head(m.sdim) = s;
  input.tail(m.adim) = a;
  const Vector out = diff::mlp_forward(m.net, input);
  return m.predict_delta ? Vector(s + out) : out;
}

Matrix predict_next(const DynamicsModel& m, const Matrix& states, const Matrix& actions) {
  require(states.cols() == m.sdim && actions.cols() == m.adim &&
              states.rows() == actions.rows(),
          "predict_next: dimension mismatch");
  Matrix input(states.rows(), m.sdim + m.adim);
  input.leftCols(m.sdim) = states;
  input.rightCols(m.adim) = actions;
  Matrix out = diff::mlp_forward(m.net, input);
  if (m.predict_delta) out += states;
  return out;
}

scalar_t eval_model(const DynamicsModel& m, const data::Dataset& d) {
  require(!d.empty(), "eval_model: empty dataset");
  Matrix states(static_cast<index_t>(d.size()), d.sdim);
  Matrix actions(static_cast<index_t>(d.size()), d.adim);
  Matrix next(static_cast<index_t>(d.size()), d.sdim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    states.row(static_cast<index_t>(i)) = d.transitions[i].s.transpose();
    actions.row(static_cast<index_t>(i)) = d.transitions[i].a.transpose();
    next.row(static_cast<index_t>(i)) = d.transitions[i].s2.transpose();
  }
  return diff::mse_value(predict_next(m, states, actions), next);
}

void save_model(const DynamicsModel& m, const std::filesystem::path& weights,
                const std::filesystem::path& sidecar) {
  diff::save_mlp(m.net, weights);
  nlohmann::json meta;
  meta["predict_delta"] = m.predict_delta;
  meta["sdim"] = m.sdim;
  meta["adim"] = m.adim;
  std::ofstream out(sidecar);
  require(out.good(), "save_model: cannot open " + sidecar.string());
  out << meta.dump(1) << "\n";
}

DynamicsModel load_model(const std::filesystem::path& weights,
                         const std::filesystem::path& sidecar) {
  DynamicsModel m;
  m.net = diff::load_mlp(weights);
  std::ifstream in(sidecar);
  if (!in.good()) throw ParseError("load_model: cannot open " + sidecar.string());
  nlohmann::json meta;
  try {
    in >> meta;
    m.predict_delta = meta.at("predict_delta").get<bool>();
    m.sdim = meta.at("sdim").get<int>();
    m.adim = meta.at("adim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_model sidecar: " + std::string(e.what()));
  }
  if (m.sdim + m.adim != m.net.input_dim || m.net.output_dim != m.sdim)
    throw SchemaError("load_model: sidecar dims disagree with weights");
  return m;
}

}  // namespace equiaug::dyn
