#include "equiaug/bounds.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "equiaug/optimizer.hpp"

namespace equiaug::bounds {

TranslationBounds symmetric_bounds(index_t dims, scalar_t width) {
  TranslationBounds b;
  b.low = Vector::Constant(dims, -width / 2.0);
  b.high = Vector::Constant(dims, width / 2.0);
  return b;
}

TranslationBounds clamp_valid(const TranslationBounds& b, scalar_t tol) {
  TranslationBounds out = b;
  for (index_t i = 0; i < b.dims(); ++i) {
    if (out.low[i] > out.high[i]) {
      require(out.low[i] - out.high[i] <= tol,
              "clamp_valid: bounds inverted beyond tolerance");
      const scalar_t mid = 0.5 * (out.low[i] + out.high[i]);
      out.low[i] = mid;
      out.high[i] = mid;
    }
  }
  return out;
}

BoundsLearnConfig default_config(LossVariant variant) {
  BoundsLearnConfig cfg;
  cfg.variant = variant;
  cfg.lambda_e = variant == LossVariant::v1 ? 0.1 : 0.01;
  return cfg;
}

Vector apply_translation(const Vector& x, const Vector& u) {
  require(x.size() == u.size(), "apply_translation: length mismatch");
  return x + u;
}

Matrix sample_offsets(const TranslationBounds& b, int n, Rng& rng) {
  require(n >= 1, "sample_offsets: n must be >= 1");
  const Matrix eps = rng.uniform_matrix(n, b.dims(), 0.0, 1.0);
  const Vector width = b.widths();
  Matrix u(n, b.dims());
  for (index_t i = 0; i < u.rows(); ++i)
    u.row(i) = b.low.transpose() + eps.row(i).cwiseProduct(width.transpose());
  return u;
}

scalar_t entropy_reg(const TranslationBounds& b, scalar_t floor) {
  require(floor > 0.0, "entropy_reg: floor must be positive");
  scalar_t h = 0.0;
  for (index_t i = 0; i < b.dims(); ++i)
    h += std::log(std::max(b.high[i] - b.low[i], floor));
  return h;
}

scalar_t validity_reg(const TranslationBounds& b) {
  return (b.low - b.high).cwiseMax(0.0).sum();
}

scalar_t equivariance_loss(const Predictor& f, const Matrix& states, const Matrix& actions,
                           const Matrix& next_states, const Matrix& offsets) {
  require(states.rows() > 0, "equivariance_loss: empty batch");
  require(states.rows() == actions.rows() && states.rows() == next_states.rows() &&
              states.rows() == offsets.rows(),
          "equivariance_loss: row counts disagree");
  require(states.cols() == offsets.cols(), "equivariance_loss: offset width mismatch");

  Matrix pred(states.rows(), states.cols());
  for (index_t i = 0; i < states.rows(); ++i) {
    const Vector translated = states.row(i).transpose() + offsets.row(i).transpose();
    pred.row(i) = f(translated, actions.row(i).transpose()).transpose();
  }
  return diff::mse_value(pred, next_states + offsets);
}

scalar_t equivariance_loss(const dyn::DynamicsModel& m, const Matrix& states,
                           const Matrix& actions, const Matrix& next_states,
                           const Matrix& offsets) {
  require(states.rows() == offsets.rows() && states.cols() == offsets.cols(),
          "equivariance_loss: offset shape mismatch");
  const Matrix pred = dyn::predict_next(m, states + offsets, actions);
  return diff::mse_value(pred, next_states + offsets);
}

BoundsOnTape bounds_on_tape(diff::Tape& t, const TranslationBounds& b) {
  BoundsOnTape phi;
  phi.low = t.constant(Matrix(b.low.transpose()));
  phi.high = t.constant(Matrix(b.high.transpose()));
  return phi;
}

TapedPredictor taped_model_predictor(const dyn::DynamicsModel& m) {
  return [net = m.net, delta = m.predict_delta](diff::Tape& t, diff::NodeId states,
                                                const Matrix& actions) {
    diff::NodeId out = diff::mlp_forward_frozen(t, net, states, actions);
    if (delta) out = t.add(states, out);
    return out;
  };
}

diff::NodeId sample_offsets(diff::Tape& t, const BoundsOnTape& phi, const Matrix& eps) {
  // u = low + eps (high - low); rows broadcast over the 1 x d bound nodes.
  const diff::NodeId width = diff::sub(t, phi.high, phi.low);
  return t.add(phi.low, t.mul(t.constant(eps), width));
}

diff::NodeId entropy_reg(diff::Tape& t, const BoundsOnTape& phi, scalar_t floor) {
  require(floor > 0.0, "entropy_reg: floor must be positive");
  const diff::NodeId width = diff::sub(t, phi.high, phi.low);
  // max(w, floor) == relu(w - floor) + floor; below the floor no gradient.
  const diff::NodeId floored =
      diff::add_scalar(t, t.relu(diff::add_scalar(t, width, -floor)), floor);
  return diff::sum(t, t.log(floored));
}

diff::NodeId validity_reg(diff::Tape& t, const BoundsOnTape& phi) {
  return diff::sum(t, t.relu(diff::sub(t, phi.low, phi.high)));
}

diff::NodeId equivariance_loss(diff::Tape& t, const TapedPredictor& f, const Matrix& states,
                               const Matrix& actions, const Matrix& next_states,
                               diff::NodeId offsets) {
  require(states.rows() > 0, "equivariance_loss: empty batch");
  require(t.value(offsets).rows() == states.rows() &&
              t.value(offsets).cols() == states.cols(),
          "equivariance_loss: offset shape mismatch");
  const diff::NodeId translated = t.add(t.constant(states), offsets);
  const diff::NodeId pred = f(t, translated, actions);
  const diff::NodeId target = t.add(t.constant(next_states), offsets);
  return diff::mse(t, pred, target);
}

JointLossParts joint_loss(diff::Tape& t, const BoundsOnTape& phi, const TapedPredictor& f,
                          const Matrix& states, const Matrix& actions,
                          const Matrix& next_states, const BoundsLearnConfig& cfg,
                          const Matrix& eps) {
  JointLossParts parts;
  const diff::NodeId offsets = sample_offsets(t, phi, eps);
  const diff::NodeId l_eq = equivariance_loss(t, f, states, actions, next_states, offsets);
  const diff::NodeId r_ent = entropy_reg(t, phi, cfg.entropy_floor);
  const diff::NodeId r_val = validity_reg(t, phi);

  parts.loss_eq = t.value_scalar(l_eq);
  parts.r_ent = t.value_scalar(r_ent);
  parts.r_val = t.value_scalar(r_val);

  const diff::NodeId val_term = diff::scale(t, r_val, cfg.lambda_v);
  if (cfg.variant == LossVariant::v1) {
    parts.loss = t.add(diff::sub(t, l_eq, diff::scale(t, r_ent, cfg.lambda_e)), val_term);
    // Reported for the trace only; u = 0 makes it independent of the bounds.
    const diff::NodeId zeros = t.constant(Matrix::Zero(states.rows(), states.cols()));
    parts.loss_dyn =
        t.value_scalar(equivariance_loss(t, f, states, actions, next_states, zeros));
  } else {
    const diff::NodeId zeros = t.constant(Matrix::Zero(states.rows(), states.cols()));
    const diff::NodeId l_dyn = equivariance_loss(t, f, states, actions, next_states, zeros);
    parts.loss_dyn = t.value_scalar(l_dyn);
    const diff::NodeId margin =
        diff::add_scalar(t, diff::sub(t, l_eq, l_dyn), -cfg.lambda_e);
    parts.loss = t.add(t.mul(r_ent, margin), val_term);
  }
  return parts;
}

namespace {

struct BatchArrays {
  Matrix states;
  Matrix actions;
  Matrix next_states;
};

BatchArrays dataset_arrays(const data::Dataset& d) {
  BatchArrays arr;
  const auto n = static_cast<index_t>(d.size());
  arr.states.resize(n, d.sdim);
  arr.actions.resize(n, d.adim);
  arr.next_states.resize(n, d.sdim);
  for (index_t i = 0; i < n; ++i) {
    arr.states.row(i) = d.transitions[i].s.transpose();
    arr.actions.row(i) = d.transitions[i].a.transpose();
    arr.next_states.row(i) = d.transitions[i].s2.transpose();
  }
  return arr;
}

std::pair<TranslationBounds, BoundsTrace> learn_bounds_impl(
    const TapedPredictor* f, const BatchArrays* data, int state_dim,
    const BoundsLearnConfig& cfg) {
  require(cfg.iterations >= 1, "learn_bounds: iterations must be >= 1");
  require(cfg.lambda_v > 0.0, "learn_bounds: lambda_v must be positive");
  require(cfg.entropy_floor > 0.0, "learn_bounds: entropy floor must be positive");
  require(cfg.offsets_per_sample >= 1, "learn_bounds: offsets per sample must be >= 1");

  Rng rng(cfg.seed);
  TranslationBounds b = symmetric_bounds(state_dim, cfg.init_width);
  Matrix low = b.low.transpose();
  Matrix high = b.high.transpose();

  diff::Optimizer opt({.learning_rate = cfg.learning_rate, .plain_sgd = cfg.plain_sgd});
  BoundsTrace trace;
  trace.rows.reserve(cfg.iterations);

  for (int k = 0; k < cfg.iterations; ++k) {
    diff::Tape tape;
    BoundsOnTape phi{tape.constant(low), tape.constant(high)};

    JointLossParts parts;
    if (f != nullptr) {
      const index_t n = data->states.rows();
      const index_t rows =
          static_cast<index_t>(cfg.batch_size) * cfg.offsets_per_sample;
      Matrix bs(rows, data->states.cols());
      Matrix ba(rows, data->actions.cols());
      Matrix bs2(rows, data->next_states.cols());
      for (index_t r = 0; r < rows; ++r) {
        const auto i = static_cast<index_t>(rng.below(static_cast<std::uint64_t>(n)));
        bs.row(r) = data->states.row(i);
        ba.row(r) = data->actions.row(i);
        bs2.row(r) = data->next_states.row(i);
      }
      const Matrix eps = rng.uniform_matrix(rows, state_dim, 0.0, 1.0);
      parts = joint_loss(tape, phi, *f, bs, ba, bs2, cfg, eps);
    } else {
      // Entropy-only ablation: no equivariance term, no data.
      const diff::NodeId r_ent = entropy_reg(tape, phi, cfg.entropy_floor);
      const diff::NodeId r_val = validity_reg(tape, phi);
      parts.r_ent = tape.value_scalar(r_ent);
      parts.r_val = tape.value_scalar(r_val);
      parts.loss = tape.add(diff::scale(tape, r_ent, -cfg.lambda_e),
                            diff::scale(tape, r_val, cfg.lambda_v));
    }

    if (!std::isfinite(tape.value_scalar(parts.loss)))
      throw NumericalError("learn_bounds: non-finite loss at iteration " +
                           std::to_string(k));

    BoundsTraceRow row;
    row.iter = k;
    row.loss_eq = parts.loss_eq;
    row.r_ent = parts.r_ent;
    row.r_val = parts.r_val;
    row.loss_dyn = parts.loss_dyn;
    row.low = low.row(0).transpose();
    row.high = high.row(0).transpose();
    trace.rows.push_back(std::move(row));

    tape.backward(parts.loss);
    opt.step({&low, &high}, {tape.adjoint(phi.low), tape.adjoint(phi.high)});
  }

  b.low = low.row(0).transpose();
  b.high = high.row(0).transpose();
  return {std::move(b), std::move(trace)};
}

}  // namespace

std::pair<TranslationBounds, BoundsTrace> learn_bounds(const dyn::DynamicsModel& m,
                                                       const data::Dataset& d,
                                                       const BoundsLearnConfig& cfg) {
  require(!d.empty(), "learn_bounds: empty dataset");
  const TapedPredictor f = taped_model_predictor(m);
  const BatchArrays arrays = dataset_arrays(d);
  return learn_bounds_impl(&f, &arrays, d.sdim, cfg);
}

std::pair<TranslationBounds, BoundsTrace> learn_bounds(const TapedPredictor& f,
                                                       const Matrix& states,
                                                       const Matrix& actions,
                                                       const Matrix& next_states,
                                                       const BoundsLearnConfig& cfg) {
  BatchArrays arrays{states, actions, next_states};
  return learn_bounds_impl(&f, &arrays, static_cast<int>(states.cols()), cfg);
}

BoundsTrace entropy_only_ablation(int state_dim, const BoundsLearnConfig& cfg) {
  return learn_bounds_impl(nullptr, nullptr, state_dim, cfg).second;
}

data::Dataset augment_dataset(const data::Dataset& d, const TranslationBounds& b,
                              const AugmentConfig& cfg) {
  require(cfg.passes >= 1, "augment_dataset: passes must be >= 1");
  require(b.dims() == d.sdim, "augment_dataset: bounds width must match state dim");
  require(b.valid(), "augment_dataset: invalid bounds (low above high)");

  data::Dataset out;
  out.env_tag = d.env_tag;
  out.sdim = d.sdim;
  out.adim = d.adim;
  out.gdim = d.gdim;
  out.seed = cfg.seed;
  out.transitions.reserve(static_cast<std::size_t>(cfg.passes) * d.size());

  int next_traj = 0;
  for (const data::Transition& tr : d.transitions)
    next_traj = std::max(next_traj, tr.traj_id + 1);

  Rng rng(cfg.seed);
  for (int pass = 0; pass < cfg.passes; ++pass) {
    Rng pass_rng = rng.derive(static_cast<std::uint64_t>(pass));
    for (const data::Transition& tr : d.transitions) {
      const Matrix u = sample_offsets(b, 1, pass_rng);
      const Vector offset = u.row(0).transpose();
      data::Transition aug = tr;
      aug.s = apply_translation(tr.s, offset);
      aug.s2 = apply_translation(tr.s2, offset);
      aug.g = apply_translation(tr.g, offset.head(tr.g.size()));
      aug.traj_id = next_traj++;
      aug.t = 0;
      aug.origin = data::Origin::augmented;
      out.transitions.push_back(std::move(aug));
    }
  }
  return out;
}

data::Dataset concat_datasets(const data::Dataset& a, const data::Dataset& b) {
  require(a.env_tag == b.env_tag && a.sdim == b.sdim && a.adim == b.adim &&
              a.gdim == b.gdim,
          "concat_datasets: incompatible datasets");
  data::Dataset out = a;
  int next_traj = 0;
  for (const data::Transition& tr : a.transitions)
    next_traj = std::max(next_traj, tr.traj_id + 1);
  for (data::Transition tr : b.transitions) {
    tr.traj_id += next_traj;
    out.transitions.push_back(std::move(tr));
  }
  return out;
}

void save_bounds(const TranslationBounds& b, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["low"] = nlohmann::json::array();
  doc["high"] = nlohmann::json::array();
  for (index_t i = 0; i < b.dims(); ++i) {
    doc["low"].push_back(b.low[i]);
    doc["high"].push_back(b.high[i]);
  }
  std::ofstream out(path);
  require(out.good(), "save_bounds: cannot open " + path.string());
  out << doc.dump(1) << "\n";
}

TranslationBounds load_bounds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("load_bounds: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_bounds: " + std::string(e.what()));
  }
  const auto& lo = doc.at("low");
  const auto& hi = doc.at("high");
  if (lo.size() != hi.size() || lo.empty()) throw SchemaError("load_bounds: bad arrays");
  TranslationBounds b;
  b.low.resize(static_cast<index_t>(lo.size()));
  b.high.resize(static_cast<index_t>(hi.size()));
  for (index_t i = 0; i < b.dims(); ++i) {
    b.low[i] = lo[i].get<scalar_t>();
    b.high[i] = hi[i].get<scalar_t>();
  }
  return b;
}

void save_trace_csv(const BoundsTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "save_trace_csv: cannot open " + path.string());
  require(!trace.rows.empty(), "save_trace_csv: empty trace");
  const index_t d = trace.rows.front().low.size();

  out << "iter,loss_eq,r_ent,r_val,loss_dyn";
  for (index_t i = 0; i < d; ++i) out << ",low_" << i;
  for (index_t i = 0; i < d; ++i) out << ",high_" << i;
  out << "\n";

  out << std::setprecision(17);
  for (const BoundsTraceRow& row : trace.rows) {
    out << row.iter << "," << row.loss_eq << "," << row.r_ent << "," << row.r_val << ","
        << row.loss_dyn;
    for (index_t i = 0; i < d; ++i) out << "," << row.low[i];
    for (index_t i = 0; i < d; ++i) out << "," << row.high[i];
    out << "\n";
  }
}

}  // namespace equiaug::bounds
