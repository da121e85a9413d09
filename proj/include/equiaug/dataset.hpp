#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "equiaug/types.hpp"

namespace equiaug::data {

enum class Origin { original, augmented, relabeled };

std::string origin_tag(Origin o);
Origin origin_from_tag(const std::string& tag);

/// One logged step. Within a trajectory, s2 at step t equals s at step t+1.
struct Transition {
  Vector s;
  Vector a;
  scalar_t r = 0.0;
  Vector s2;
  Vector g;
  bool done = false;
  int traj_id = 0;
  int t = 0;
  Origin origin = Origin::original;
};

struct Dataset {
  std::vector<Transition> transitions;
  std::string env_tag;
  int sdim = 0;
  int adim = 0;
  int gdim = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }

  /// Transition indices grouped by trajectory, in step order.
  std::vector<std::vector<std::size_t>> trajectories() const;
};

bool transitions_equal(const Transition& a, const Transition& b);
bool datasets_equal(const Dataset& a, const Dataset& b);

/// JSON-lines persistence. First line is the metadata object
/// {"env":...,"sdim":...,"adim":...,"gdim":...,"seed":...}; each following
/// line is one transition. Round-trips are bit-exact.
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace equiaug::data
