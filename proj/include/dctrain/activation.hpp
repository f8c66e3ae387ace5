#pragma once

#include <optional>
#include <string>

#include "dctrain/graph.hpp"

namespace dctrain {

enum class Activation { Tanh, Relu, IRelu, Softplus, ShiftedSoftplus, Silu };

const char* activation_name(Activation a);
std::optional<Activation> activation_from_name(const std::string& name);

Op activation_op(Activation a);

// Closed-form scalar value and first/second derivatives. Conventions at 0:
// Relu'(0) = 0 and Heaviside(0) = 0, so IRelu''(0) = 0.
double activation_apply(Activation a, double x);
double activation_d1(Activation a, double x);
double activation_d2(Activation a, double x);

struct UndefinedRatioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Relative ratio of the update magnitude under standard training versus
// derivative-constrained training, 1 / (2 + (s''(z)/s'(z)) * g), where z is
// the pre-activation and g the input-derivative of the layer below.
double update_ratio(Activation a, double z, double g);

}  // namespace dctrain
