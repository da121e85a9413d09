#pragma once

#include <filesystem>
#include <string>

#include "equiaug/config.hpp"

namespace equiaug::cli {

/// A prerequisite stage artifact is absent; mapped to exit code 2.
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed artifact names inside one output directory.
struct OutputPaths {
  std::filesystem::path dir;

  std::filesystem::path dataset() const { return dir / "dataset.jsonl"; }
  std::filesystem::path model() const { return dir / "model.json"; }
  std::filesystem::path model_meta() const { return dir / "model_meta.json"; }
  std::filesystem::path bounds() const { return dir / "bounds.json"; }
  std::filesystem::path bounds_trace() const { return dir / "bounds_trace.csv"; }
  std::filesystem::path augmented() const { return dir / "augmented.jsonl"; }
  std::filesystem::path policy() const { return dir / "policy.json"; }
  std::filesystem::path policy_unaug() const { return dir / "policy_unaug.json"; }
  std::filesystem::path critic() const { return dir / "critic.json"; }
  std::filesystem::path returns_csv() const { return dir / "returns.csv"; }
  std::filesystem::path summary() const { return dir / "summary.csv"; }
  std::filesystem::path goal_hist() const { return dir / "goal_hist.csv"; }
  std::filesystem::path metrics(const std::string& stage) const {
    return dir / ("metrics_" + stage + ".csv");
  }
  std::filesystem::path lock() const { return dir / ".lock"; }
};

/// One writer per output directory; the lock file is removed on destruction.
class StageLock {
 public:
  explicit StageLock(const OutputPaths& paths);
  ~StageLock();
  StageLock(const StageLock&) = delete;
  StageLock& operator=(const StageLock&) = delete;

 private:
  std::filesystem::path path_;
};

void cmd_generate(const Experiment& ex, const OutputPaths& out);
void cmd_train_model(const Experiment& ex, const OutputPaths& out);
void cmd_learn_bounds(const Experiment& ex, const OutputPaths& out);
void cmd_augment(const Experiment& ex, const OutputPaths& out);
void cmd_train_policy(const Experiment& ex, const OutputPaths& out);
void cmd_evaluate(const Experiment& ex, const OutputPaths& out);
void cmd_report(const Experiment& ex, const OutputPaths& out);

/// All stages plus the three Fig.-6 evaluations (unaugmented policy on train
/// and test goals, augmented policy on test goals); writes summary.csv.
void run_pipeline(const Experiment& ex, const OutputPaths& out);

}  // namespace equiaug::cli
