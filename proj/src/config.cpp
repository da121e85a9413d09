#include "equiaug/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace equiaug::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = {
      "env.kind", "env.tolerance",
      "env.pm.dt", "env.pm.action_gain", "env.pm.max_speed", "env.pm.arena_half_width",
      "env.reacher.dt", "env.reacher.l1", "env.reacher.l2", "env.reacher.m1",
      "env.reacher.m2", "env.reacher.damping", "env.reacher.torque_gain",
      "env.reacher.max_omega",
      "noise.enabled", "noise.dim", "noise.threshold", "noise.amplitude",
      "data.n_traj", "data.horizon", "data.kp", "data.kd", "data.split",
      "model.hidden", "model.lr", "model.batch", "model.epochs", "model.val_fraction",
      "model.predict_delta",
      "bounds.variant", "bounds.lambda_e", "bounds.lambda_v", "bounds.lr", "bounds.iters",
      "bounds.batch", "bounds.offsets_per_sample", "bounds.entropy_floor",
      "bounds.init_width",
      "augment.passes",
      "rl.hidden", "rl.discount", "rl.temperature", "rl.advantage_samples",
      "rl.weight_clip", "rl.policy_lr", "rl.critic_lr", "rl.batch", "rl.steps",
      "rl.target_period", "rl.policy_std", "rl.use_augmented", "rl.algorithm",
      "eval.episodes", "eval.horizon",
      "seed",
  };
  return keys;
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("config: cannot open " + path.string());
  Config cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end())
    throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

scalar_t Config::get_real(const std::string& key, scalar_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const scalar_t v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not an integer: " + it->second);
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not an unsigned integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config: key '" + key + "' is not a boolean: " + it->second);
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      std::vector<int> fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(trim(item)));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' has a non-integer item: " + item);
    }
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
  return out;
}

std::uint64_t stage_seed(std::uint64_t master, Stage stage) {
  return mix_seed(master, static_cast<std::uint64_t>(stage));
}

Experiment build_experiment(const Config& cfg) {
  Experiment ex;

  const std::string kind = cfg.get_string("env.kind", "point_mass");
  const scalar_t tolerance = cfg.get_real("env.tolerance", 0.1);
  if (tolerance <= 0.0) throw ConfigError("config: env.tolerance must be positive");
  if (kind == "point_mass") {
    env::PointMassParams p;
    p.dt = cfg.get_real("env.pm.dt", p.dt);
    p.action_gain = cfg.get_real("env.pm.action_gain", p.action_gain);
    p.max_speed = cfg.get_real("env.pm.max_speed", p.max_speed);
    p.arena_half_width = cfg.get_real("env.pm.arena_half_width", p.arena_half_width);
    if (p.dt <= 0.0 || p.max_speed <= 0.0 || p.arena_half_width <= 0.0)
      throw ConfigError("config: point mass parameters must be positive");
    ex.environment = env::Environment::point_mass(p, tolerance);
  } else if (kind == "reacher") {
    env::ReacherParams p;
    p.dt = cfg.get_real("env.reacher.dt", p.dt);
    p.l1 = cfg.get_real("env.reacher.l1", p.l1);
    p.l2 = cfg.get_real("env.reacher.l2", p.l2);
    p.m1 = cfg.get_real("env.reacher.m1", p.m1);
    p.m2 = cfg.get_real("env.reacher.m2", p.m2);
    p.damping = cfg.get_real("env.reacher.damping", p.damping);
    p.torque_gain = cfg.get_real("env.reacher.torque_gain", p.torque_gain);
    p.max_omega = cfg.get_real("env.reacher.max_omega", p.max_omega);
    if (p.dt <= 0.0 || p.l1 <= 0.0 || p.l2 <= 0.0 || p.m1 <= 0.0 || p.m2 <= 0.0)
      throw ConfigError("config: reacher parameters must be positive");
    ex.environment = env::Environment::reacher(p, tolerance);
  } else {
    throw ConfigError("config: env.kind must be point_mass or reacher");
  }

  if (cfg.get_bool("noise.enabled", false)) {
    env::NoiseRegion region;
    region.dim = cfg.get_int("noise.dim", 0);
    region.threshold = cfg.get_real("noise.threshold", 0.0);
    region.amplitude = cfg.get_real("noise.amplitude", 0.1);
    if (region.amplitude < 0.0) throw ConfigError("config: noise.amplitude must be >= 0");
    if (region.dim < 0 || region.dim >= ex.environment.state_dim())
      throw ConfigError("config: noise.dim out of range");
    ex.noise = region;
  }

  ex.n_traj = cfg.get_int("data.n_traj", 100);
  ex.controller.max_steps = cfg.get_int("data.horizon", 100);
  ex.controller.kp = cfg.get_real("data.kp", ex.controller.kp);
  ex.controller.kd = cfg.get_real("data.kd", ex.controller.kd);
  if (ex.n_traj < 1) throw ConfigError("config: data.n_traj must be >= 1");
  if (ex.controller.max_steps < 1) throw ConfigError("config: data.horizon must be >= 1");
  const std::string split = cfg.get_string("data.split", "train");
  if (split == "train") {
    ex.data_split = env::GoalSplit::train;
  } else if (split == "test") {
    ex.data_split = env::GoalSplit::test;
  } else {
    throw ConfigError("config: data.split must be train or test");
  }

  ex.model.hidden_dims = cfg.get_int_list("model.hidden", ex.model.hidden_dims);
  ex.model.learning_rate = cfg.get_real("model.lr", ex.model.learning_rate);
  ex.model.batch_size = cfg.get_int("model.batch", ex.model.batch_size);
  ex.model.epochs = cfg.get_int("model.epochs", ex.model.epochs);
  ex.model.validation_fraction = cfg.get_real("model.val_fraction",
                                              ex.model.validation_fraction);
  ex.model.predict_delta = cfg.get_bool("model.predict_delta", ex.model.predict_delta);
  if (ex.model.batch_size < 1 || ex.model.epochs < 1)
    throw ConfigError("config: model.batch and model.epochs must be >= 1");
  if (ex.model.validation_fraction < 0.0 || ex.model.validation_fraction >= 1.0)
    throw ConfigError("config: model.val_fraction must be in [0, 1)");

  const std::string variant = cfg.get_string("bounds.variant", "v1");
  if (variant == "v1") {
    ex.bounds_cfg = bounds::default_config(bounds::LossVariant::v1);
  } else if (variant == "v2") {
    ex.bounds_cfg = bounds::default_config(bounds::LossVariant::v2);
  } else {
    throw ConfigError("config: bounds.variant must be v1 or v2");
  }
  ex.bounds_cfg.lambda_e = cfg.get_real("bounds.lambda_e", ex.bounds_cfg.lambda_e);
  ex.bounds_cfg.lambda_v = cfg.get_real("bounds.lambda_v", ex.bounds_cfg.lambda_v);
  ex.bounds_cfg.learning_rate = cfg.get_real("bounds.lr", ex.bounds_cfg.learning_rate);
  ex.bounds_cfg.iterations = cfg.get_int("bounds.iters", ex.bounds_cfg.iterations);
  ex.bounds_cfg.batch_size = cfg.get_int("bounds.batch", ex.bounds_cfg.batch_size);
  ex.bounds_cfg.offsets_per_sample =
      cfg.get_int("bounds.offsets_per_sample", ex.bounds_cfg.offsets_per_sample);
  ex.bounds_cfg.entropy_floor = cfg.get_real("bounds.entropy_floor",
                                             ex.bounds_cfg.entropy_floor);
  ex.bounds_cfg.init_width = cfg.get_real("bounds.init_width", ex.bounds_cfg.init_width);
  if (ex.bounds_cfg.iterations < 1) throw ConfigError("config: bounds.iters must be >= 1");
  if (ex.bounds_cfg.lambda_v <= 0.0)
    throw ConfigError("config: bounds.lambda_v must be positive");
  if (ex.bounds_cfg.entropy_floor <= 0.0)
    throw ConfigError("config: bounds.entropy_floor must be positive");

  ex.augment.passes = cfg.get_int("augment.passes", ex.augment.passes);
  if (ex.augment.passes < 1) throw ConfigError("config: augment.passes must be >= 1");

  ex.rl_cfg.hidden_dims = cfg.get_int_list("rl.hidden", ex.rl_cfg.hidden_dims);
  ex.rl_cfg.discount = cfg.get_real("rl.discount", ex.rl_cfg.discount);
  ex.rl_cfg.temperature = cfg.get_real("rl.temperature", ex.rl_cfg.temperature);
  ex.rl_cfg.advantage_samples = cfg.get_int("rl.advantage_samples",
                                            ex.rl_cfg.advantage_samples);
  ex.rl_cfg.weight_clip = cfg.get_real("rl.weight_clip", ex.rl_cfg.weight_clip);
  ex.rl_cfg.policy_lr = cfg.get_real("rl.policy_lr", ex.rl_cfg.policy_lr);
  ex.rl_cfg.critic_lr = cfg.get_real("rl.critic_lr", ex.rl_cfg.critic_lr);
  ex.rl_cfg.batch_size = cfg.get_int("rl.batch", ex.rl_cfg.batch_size);
  ex.rl_cfg.gradient_steps = cfg.get_int("rl.steps", ex.rl_cfg.gradient_steps);
  ex.rl_cfg.target_period = cfg.get_int("rl.target_period", ex.rl_cfg.target_period);
  ex.rl_cfg.policy_std = cfg.get_real("rl.policy_std", ex.rl_cfg.policy_std);
  if (ex.rl_cfg.discount <= 0.0 || ex.rl_cfg.discount >= 1.0)
    throw ConfigError("config: rl.discount must be in (0, 1)");
  if (ex.rl_cfg.temperature <= 0.0)
    throw ConfigError("config: rl.temperature must be positive");
  if (ex.rl_cfg.advantage_samples < 1)
    throw ConfigError("config: rl.advantage_samples must be >= 1");
  ex.rl_algorithm = cfg.get_string("rl.algorithm", "crr");
  if (ex.rl_algorithm != "crr" && ex.rl_algorithm != "bc")
    throw ConfigError("config: rl.algorithm must be crr or bc");
  ex.rl_use_augmented = cfg.get_bool("rl.use_augmented", true);

  ex.eval_episodes = cfg.get_int("eval.episodes", 100);
  ex.eval_horizon = cfg.get_int("eval.horizon", 100);
  if (ex.eval_episodes < 1 || ex.eval_horizon < 1)
    throw ConfigError("config: eval.episodes and eval.horizon must be >= 1");

  ex.master_seed = cfg.get_u64("seed", 0);
  ex.model.seed = stage_seed(ex.master_seed, Stage::train_model);
  ex.bounds_cfg.seed = stage_seed(ex.master_seed, Stage::learn_bounds);
  ex.augment.seed = stage_seed(ex.master_seed, Stage::augment);
  ex.rl_cfg.seed = stage_seed(ex.master_seed, Stage::train_policy);
  return ex;
}

}  // namespace equiaug::cli
