#include "equiaug/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <vector>

namespace equiaug::cli {

namespace {

struct MetricsRow {
  std::string stage;
  std::string key;
  scalar_t value;
  long step;
};

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  require(out.good(), "metrics: cannot open " + path.string());
  out << "stage,key,value,step\n" << std::setprecision(17);
  for (const MetricsRow& r : rows) {
    require(std::isfinite(r.value), "metrics: non-finite value for " + r.key);
    out << r.stage << "," << r.key << "," << r.value << "," << r.step << "\n";
  }
}

void require_artifact(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw MissingArtifact("missing artifact: " + path.string());
}

data::Dataset training_set(const Experiment& ex, const OutputPaths& out) {
  require_artifact(out.dataset());
  data::Dataset d = data::load_dataset(out.dataset());
  if (ex.rl_use_augmented) {
    require_artifact(out.augmented());
    d = bounds::concat_datasets(d, data::load_dataset(out.augmented()));
  }
  return d;
}

rl::GaussianPolicy train_policy_on(const data::Dataset& d, const Experiment& ex,
                                   std::uint64_t seed) {
  rl::CrrConfig cfg = ex.rl_cfg;
  cfg.seed = seed;
  if (ex.rl_algorithm == "bc") return rl::train_bc(d, cfg);
  return rl::train_crr(d, cfg).first;
}

void write_returns_csv(const std::filesystem::path& path, const rl::EvalReport& report) {
  std::ofstream out(path);
  require(out.good(), "returns: cannot open " + path.string());
  out << "split,episode,return\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.train.returns.size(); ++i)
    out << "train," << i << "," << report.train.returns[i] << "\n";
  for (std::size_t i = 0; i < report.test.returns.size(); ++i)
    out << "test," << i << "," << report.test.returns[i] << "\n";
}

}  // namespace

StageLock::StageLock(const OutputPaths& paths) : path_(paths.lock()) {
  std::filesystem::create_directories(paths.dir);
  if (std::filesystem::exists(path_))
    throw std::runtime_error("output directory is locked by another writer: " +
                             path_.string());
  std::ofstream lock(path_);
  require(lock.good(), "cannot create lock file " + path_.string());
  lock << "locked\n";
}

StageLock::~StageLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

void cmd_generate(const Experiment& ex, const OutputPaths& out) {
  std::filesystem::create_directories(out.dir);
  Rng rng(stage_seed(ex.master_seed, Stage::generate));
  data::Dataset d = data::collect_dataset(ex.environment, ex.controller, ex.n_traj,
                                          ex.data_split, rng,
                                          ex.noise ? std::optional(*ex.noise) : std::nullopt);
  d.seed = ex.master_seed;
  data::save_dataset(d, out.dataset());

  const auto trajs = d.trajectories();
  long reached = 0;
  for (const auto& traj : trajs)
    if (d.transitions[traj.back()].r > 0.0) ++reached;
  write_metrics(out.metrics("generate"),
                {{"generate", "transitions", static_cast<scalar_t>(d.size()), 0},
                 {"generate", "trajectories", static_cast<scalar_t>(trajs.size()), 0},
                 {"generate", "reach_fraction",
                  static_cast<scalar_t>(reached) / static_cast<scalar_t>(trajs.size()), 0}});
}

void cmd_train_model(const Experiment& ex, const OutputPaths& out) {
  require_artifact(out.dataset());
  const data::Dataset d = data::load_dataset(out.dataset());
  auto [model, report] = dyn::train_dynamics_model(d, ex.model);
  dyn::save_model(model, out.model(), out.model_meta());

  std::vector<MetricsRow> rows;
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
    rows.push_back({"train_model", "epoch_loss", report.epoch_loss[e],
                    static_cast<long>(e)});
  rows.push_back({"train_model", "validation_loss", report.validation_loss, 0});
  write_metrics(out.metrics("train_model"), rows);
}

void cmd_learn_bounds(const Experiment& ex, const OutputPaths& out) {
  require_artifact(out.model());
  require_artifact(out.model_meta());
  require_artifact(out.dataset());
  const dyn::DynamicsModel model = dyn::load_model(out.model(), out.model_meta());
  const data::Dataset d = data::load_dataset(out.dataset());
  auto [learned, trace] = bounds::learn_bounds(model, d, ex.bounds_cfg);
  bounds::save_bounds(learned, out.bounds());
  bounds::save_trace_csv(trace, out.bounds_trace());

  std::vector<MetricsRow> rows;
  const Vector widths = learned.widths();
  for (index_t i = 0; i < widths.size(); ++i)
    rows.push_back({"learn_bounds", "width_" + std::to_string(i), widths[i], 0});
  write_metrics(out.metrics("learn_bounds"), rows);
}

void cmd_augment(const Experiment& ex, const OutputPaths& out) {
  require_artifact(out.dataset());
  require_artifact(out.bounds());
  const data::Dataset d = data::load_dataset(out.dataset());
  const bounds::TranslationBounds b = bounds::clamp_valid(bounds::load_bounds(out.bounds()));
  bounds::AugmentConfig cfg = ex.augment;
  cfg.seed = stage_seed(ex.master_seed, Stage::augment);
  const data::Dataset aug = bounds::augment_dataset(d, b, cfg);
  data::save_dataset(aug, out.augmented());
  write_metrics(out.metrics("augment"),
                {{"augment", "transitions", static_cast<scalar_t>(aug.size()), 0},
                 {"augment", "passes", static_cast<scalar_t>(cfg.passes), 0}});
}

void cmd_train_policy(const Experiment& ex, const OutputPaths& out) {
  const data::Dataset d = training_set(ex, out);
  rl::CrrConfig cfg = ex.rl_cfg;
  if (ex.rl_algorithm == "bc") {
    rl::GaussianPolicy policy = rl::train_bc(d, cfg);
    rl::save_policy(policy, out.policy());
  } else {
    auto [policy, critic] = rl::train_crr(d, cfg);
    rl::save_policy(policy, out.policy());
    diff::save_mlp(critic.net, out.critic());
  }
  write_metrics(out.metrics("train_policy"),
                {{"train_policy", "training_transitions", static_cast<scalar_t>(d.size()), 0},
                 {"train_policy", "gradient_steps",
                  static_cast<scalar_t>(ex.rl_cfg.gradient_steps), 0}});
}

void cmd_evaluate(const Experiment& ex, const OutputPaths& out) {
  require_artifact(out.policy());
  const rl::GaussianPolicy policy = rl::load_policy(out.policy());
  const Rng rng(stage_seed(ex.master_seed, Stage::evaluate));
  const rl::EvalReport report =
      rl::evaluate_policy(ex.environment, policy, ex.eval_episodes, ex.eval_horizon, rng);
  write_returns_csv(out.returns_csv(), report);
  write_metrics(out.metrics("evaluate"),
                {{"evaluate", "train_mean", report.train.mean, 0},
                 {"evaluate", "train_stderr", report.train.stderr_mean, 0},
                 {"evaluate", "test_mean", report.test.mean, 0},
                 {"evaluate", "test_stderr", report.test.stderr_mean, 0}});
}

void cmd_report(const Experiment& ex, const OutputPaths& out) {
  require_artifact(out.dataset());
  require_artifact(out.bounds_trace());
  require_artifact(out.returns_csv());

  const data::Dataset d = data::load_dataset(out.dataset());
  const bool pm = ex.environment.kind() == env::EnvKind::point_mass;
  const scalar_t half =
      pm ? ex.environment.point_mass_params().arena_half_width : M_PI;
  const int bins = 5;

  data::ShiftRange range;
  range.low = Vector::Constant(2, -half);
  range.high = Vector::Constant(2, half);
  Rng rng(stage_seed(ex.master_seed, Stage::generate));
  const data::Dataset minus_start = data::translate_trajectories(
      d, ex.environment, data::TranslateMode::subtract_start, std::nullopt, rng.derive(1));
  const data::Dataset shifted = data::translate_trajectories(
      d, ex.environment, data::TranslateMode::random_shift, range, rng.derive(2));

  std::ofstream hist(out.goal_hist());
  require(hist.good(), "report: cannot open " + out.goal_hist().string());
  hist << "variant,ix,iy,x_center,y_center,count\n" << std::setprecision(17);
  auto emit = [&](const std::string& name, const data::Dataset& ds) {
    const data::GoalHistogram h = data::goal_histogram(ds, bins, -half, half);
    const scalar_t width = (h.hi - h.lo) / static_cast<scalar_t>(h.bins);
    for (int ix = 0; ix < h.bins; ++ix) {
      for (int iy = 0; iy < h.bins; ++iy) {
        hist << name << "," << ix << "," << iy << ","
             << h.lo + (ix + 0.5) * width << "," << h.lo + (iy + 0.5) * width << ","
             << h.counts[ix][iy] << "\n";
      }
    }
  };
  emit("original", d);
  emit("minus_start", minus_start);
  emit("random_shift", shifted);
}

void run_pipeline(const Experiment& ex, const OutputPaths& out) {
  cmd_generate(ex, out);
  cmd_train_model(ex, out);
  cmd_learn_bounds(ex, out);
  cmd_augment(ex, out);

  const data::Dataset original = data::load_dataset(out.dataset());
  const data::Dataset augmented_set =
      bounds::concat_datasets(original, data::load_dataset(out.augmented()));

  const rl::GaussianPolicy unaug = train_policy_on(
      original, ex, stage_seed(ex.master_seed, Stage::train_policy_unaug));
  rl::save_policy(unaug, out.policy_unaug());
  const rl::GaussianPolicy aug =
      train_policy_on(augmented_set, ex, stage_seed(ex.master_seed, Stage::train_policy));
  rl::save_policy(aug, out.policy());

  // The three Fig.-6 evaluations share goal/start draws per split, so the
  // augmented-vs-unaugmented comparison is paired.
  const Rng eval_rng(stage_seed(ex.master_seed, Stage::evaluate));
  const rl::SplitReport unaug_train = rl::evaluate_split(
      ex.environment, unaug, env::GoalSplit::train, ex.eval_episodes, ex.eval_horizon,
      eval_rng.derive(1));
  const rl::SplitReport unaug_test = rl::evaluate_split(
      ex.environment, unaug, env::GoalSplit::test, ex.eval_episodes, ex.eval_horizon,
      eval_rng.derive(2));
  const rl::SplitReport aug_test = rl::evaluate_split(
      ex.environment, aug, env::GoalSplit::test, ex.eval_episodes, ex.eval_horizon,
      eval_rng.derive(2));

  std::ofstream summary(out.summary());
  require(summary.good(), "pipeline: cannot open " + out.summary().string());
  summary << "policy,split,episodes,mean_return,stderr\n" << std::setprecision(17);
  summary << "unaugmented,train," << ex.eval_episodes << "," << unaug_train.mean << ","
          << unaug_train.stderr_mean << "\n";
  summary << "unaugmented,test," << ex.eval_episodes << "," << unaug_test.mean << ","
          << unaug_test.stderr_mean << "\n";
  summary << "augmented,test," << ex.eval_episodes << "," << aug_test.mean << ","
          << aug_test.stderr_mean << "\n";
  summary.close();

  cmd_evaluate(ex, out);
  cmd_report(ex, out);
}

}  // namespace equiaug::cli
