#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "equiaug/rng.hpp"
#include "equiaug/tape.hpp"
#include "equiaug/types.hpp"

namespace equiaug::diff {

enum class Activation { tanh, identity };

struct MlpLayer {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
  Activation act = Activation::tanh;
};

/// Feedforward network: tanh hidden layers, identity output. Immutable value
/// after training; safe for concurrent read-only evaluation.
struct MlpNetwork {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<MlpLayer> layers;
};

/// Weights zero-mean scaled by 1/sqrt(fan-in), biases zero. Deterministic
/// given the seed.
MlpNetwork mlp_init(int input_dim, const std::vector<int>& hidden_dims,
                    int output_dim, std::uint64_t seed);

/// Plain (untaped) forward pass; rows of `input` are batch samples.
Matrix mlp_forward(const MlpNetwork& net, const Matrix& input);
Vector mlp_forward(const MlpNetwork& net, const Vector& input);

/// Network parameters registered on a tape, for training the weights.
struct MlpOnTape {
  std::vector<std::pair<NodeId, NodeId>> layers;  // (w, b) per layer
};

MlpOnTape mlp_on_tape(Tape& t, const MlpNetwork& net);
NodeId mlp_forward(Tape& t, const MlpNetwork& net, const MlpOnTape& params, NodeId input);

/// Forward pass with frozen weights where only the leading input block is a
/// tape expression; `trailing` columns enter as constants. Used when
/// gradients flow to the inputs (translated states) rather than the weights.
NodeId mlp_forward_frozen(Tape& t, const MlpNetwork& net, NodeId leading,
                          const Matrix& trailing);

std::vector<Matrix*> mlp_params(MlpNetwork& net);
std::vector<Matrix> mlp_grads(const Tape& t, const MlpOnTape& params);

/// Weight JSON: {"input_dim":N,"layers":[{"w":[[...]],"b":[...],"act":"tanh"|"id"}]}.
void save_mlp(const MlpNetwork& net, const std::filesystem::path& path);
MlpNetwork load_mlp(const std::filesystem::path& path);

}  // namespace equiaug::diff
