#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dctrain/activation.hpp"
#include "dctrain/eval.hpp"
#include "dctrain/graph.hpp"

namespace dctrain {

struct MLPConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 1;
  Activation activation = Activation::Tanh;
  // Optional per-hidden-layer activation override (partial replacement);
  // entries beyond the list, or nullopt entries, use `activation`.
  std::vector<std::optional<Activation>> activation_override;
  bool use_batchnorm = false;
  std::uint64_t seed = 0;

  std::size_t num_linear() const { return hidden.size() + 1; }
  Activation layer_activation(std::size_t layer) const {
    if (layer < activation_override.size() && activation_override[layer])
      return *activation_override[layer];
    return activation;
  }
};

struct BatchNormBlock {
  Tensor gamma, beta, running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

// A plain MLP: out = W_L(...act(BN(W_0 x + b_0))...) + b_L. Weight l has
// shape (width_out, width_in); the graph computes batched row-vector inputs
// X (n, d) via X * W^T + b. No norm blocks exist unless use_batchnorm.
struct MLP {
  MLPConfig config;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  std::vector<BatchNormBlock> bn;
};

// Glorot-uniform weights from the seeded RNG, zero biases; deterministic.
MLP build_mlp(const MLPConfig& config);

// Emits graph nodes computing predictions for an (n, input_dim) input node.
// Parameters appear as Vars named <prefix>W0, <prefix>b0, ... (declared on
// first use, reused on later calls so several forward passes share them).
// In training mode batch norm uses batch statistics; in eval mode it reads
// running statistics from Vars <prefix>bn<l>_rm / _rv.
NodeId mlp_forward(Graph& g, const MLPConfig& config, NodeId x, const std::string& prefix = "",
                   bool training = true);

// Names of the trainable parameter Vars, in a fixed order.
std::vector<std::string> mlp_param_names(const MLPConfig& config, const std::string& prefix = "");

// Binds all parameters (plus running stats in eval mode) for evaluation.
void mlp_bind(const MLP& model, Bindings& bindings, const std::string& prefix = "",
              bool training = true);

// Copies trained parameter tensors back from a bindings map.
void mlp_unbind(MLP& model, const Bindings& bindings, const std::string& prefix = "");

// Checkpoint: JSON with config, flattened parameters and seed; bit-exact
// round trip.
std::string mlp_to_json(const MLP& model);
MLP mlp_from_json(const std::string& text);

}  // namespace dctrain
