#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "equiaug/bounds.hpp"
#include "equiaug/crr.hpp"
#include "equiaug/datagen.hpp"
#include "equiaug/dynamics.hpp"
#include "equiaug/env.hpp"

namespace equiaug::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key/value document with dotted section keys, e.g.
/// `bounds.lambda_e = 0.1`. Lines starting with '#' are comments. Unknown
/// keys are rejected.
class Config {
 public:
  static Config from_file(const std::filesystem::path& path);
  static const std::vector<std::string>& known_keys();

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  scalar_t get_real(const std::string& key, scalar_t fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Everything one experiment needs, with per-stage seeds derived from the
/// master seed.
struct Experiment {
  env::Environment environment = env::Environment::point_mass();
  std::optional<env::NoiseRegion> noise;
  data::ScriptedControllerParams controller;
  int n_traj = 100;
  env::GoalSplit data_split = env::GoalSplit::train;
  dyn::DynamicsModelConfig model;
  bounds::BoundsLearnConfig bounds_cfg;
  bounds::AugmentConfig augment;
  rl::CrrConfig rl_cfg;
  std::string rl_algorithm = "crr";  // crr | bc
  bool rl_use_augmented = true;
  int eval_episodes = 100;
  int eval_horizon = 100;
  std::uint64_t master_seed = 0;
};

/// Stage indices hashed with the master seed to derive stage seeds.
enum class Stage : std::uint64_t {
  generate = 1,
  train_model = 2,
  learn_bounds = 3,
  augment = 4,
  train_policy = 5,
  train_policy_unaug = 6,
  evaluate = 7,
};

std::uint64_t stage_seed(std::uint64_t master, Stage stage);

/// Validates and assembles the experiment; throws ConfigError on bad values.
Experiment build_experiment(const Config& cfg);

}  // namespace equiaug::cli
