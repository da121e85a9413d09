#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "equiaug/pipeline.hpp"

namespace {

using equiaug::cli::Config;
using equiaug::cli::ConfigError;
using equiaug::cli::Experiment;
using equiaug::cli::MissingArtifact;
using equiaug::cli::OutputPaths;

constexpr int kExitMissingArtifact = 2;
constexpr int kExitInvalidConfig = 3;
constexpr int kExitNumericalFailure = 4;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

Experiment make_experiment(const GlobalOptions& opts) {
  Config cfg;
  if (!opts.config_path.empty()) cfg = Config::from_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed >= 0) cfg.set("seed", std::to_string(opts.seed));
  return equiaug::cli::build_experiment(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant data augmentation pipeline for offline RL"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Experiment config file");
  app.add_option("--out", opts.out_dir, "Output directory for stage artifacts");
  app.add_option("--seed", opts.seed, "Master seed (overrides the config)");
  app.add_option("--set", opts.overrides, "Config override KEY=VALUE (repeatable)");

  using StageFn = void (*)(const Experiment&, const OutputPaths&);
  struct Sub {
    const char* name;
    const char* desc;
    StageFn fn;
  };
  const std::vector<Sub> subs = {
      {"generate", "Collect the scripted offline dataset", equiaug::cli::cmd_generate},
      {"train-model", "Train the one-step dynamics model", equiaug::cli::cmd_train_model},
      {"learn-bounds", "Learn the translation bounds", equiaug::cli::cmd_learn_bounds},
      {"augment", "Write the translated dataset", equiaug::cli::cmd_augment},
      {"train-policy", "Train the goal-conditioned policy", equiaug::cli::cmd_train_policy},
      {"evaluate", "Evaluate the policy on train/test goals", equiaug::cli::cmd_evaluate},
      {"report", "Emit figure-ready CSV reports", equiaug::cli::cmd_report},
      {"pipeline", "Run every stage plus the three evaluations",
       equiaug::cli::run_pipeline},
  };

  StageFn selected = nullptr;
  for (const Sub& sub : subs) {
    CLI::App* s = app.add_subcommand(sub.name, sub.desc);
    s->callback([&selected, fn = sub.fn] { selected = fn; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const Experiment ex = make_experiment(opts);
    const OutputPaths out{opts.out_dir};
    equiaug::cli::StageLock lock(out);
    selected(ex, out);
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const equiaug::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const equiaug::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const equiaug::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
